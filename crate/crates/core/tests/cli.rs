use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_thermoformal");
const LINEAR: &str = include_str!("../presets/linear.ini");
const PITCHFORK: &str = include_str!("../presets/pitchfork.ini");

/// Replaces `key = ...` lines; every key must exist.
fn with(base: &str, edits: &[(&str, &str)]) -> String {
    let mut out = String::new();
    let mut hit = vec![false; edits.len()];
    for line in base.lines() {
        let key = line.split('=').next().unwrap_or("").trim();
        match edits.iter().position(|(k, _)| *k == key) {
            Some(i) => {
                hit[i] = true;
                out.push_str(&format!("{key} = {}\n", edits[i].1));
            }
            None => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    assert!(hit.iter().all(|&h| h), "unknown key in {edits:?}");
    out
}

/// A fast linear configuration for end-to-end runs.
fn small_linear() -> String {
    with(
        LINEAR,
        &[
            ("epsilons", "0.1,0.05"),
            ("ns", "2,4,6"),
            ("t_range", "0:1:5"),
            ("attractor_samples", "300"),
            ("n_cells", "256"),
            ("gap_cells", "64,128"),
            ("pesin_cells", "64,128"),
            ("orbit_length", "20000"),
            ("lyapunov_length", "2000"),
            ("segments", "50"),
            ("glue_pairs", "6"),
            ("bowen_samples", "40"),
            ("contraction_samples", "40"),
            ("potential_samples", "2000"),
        ],
    )
}

struct Run {
    code: i32,
    dir: TempDir,
    stderr: String,
}

impl Run {
    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn report(&self) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out().join("report.json")).unwrap()).unwrap()
    }

    fn file(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn run(cmd: &str, config: &str, extra: &[&str]) -> Run {
    run_in(TempDir::new().unwrap(), cmd, config, extra)
}

fn run_in(dir: TempDir, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.path().join("input.ini");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2"])
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: o.status.code().expect("exited normally"),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        dir,
    }
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

fn artifacts(r: &Run) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(r.out())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn linear_verify_passes() {
    let r = run("verify", &small_linear(), &[]);
    assert_eq!(r.code, 0, "{}", r.file("report.json"));
    let rep = r.report();
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["command"], "verify");
    for c in rep["checks"].as_array().unwrap() {
        for k in ["name", "value", "bound", "margin", "pass"] {
            assert!(c.get(k).is_some(), "{c} lacks {k}");
        }
    }
}

#[test]
fn alpha_above_bound_fails_with_named_margin() {
    let cfg = with(PITCHFORK, &[("alpha", "0.95")]);
    let r = run("verify", &cfg, &[]);
    assert_eq!(r.code, 1);
    let rep = r.report();
    let c = check(&rep, "eq1_alpha_bound");
    assert!(c["margin"].as_f64().unwrap() < 0.0);
    assert_eq!(c["pass"], false);
}

#[test]
fn malformed_config_exits_two_with_position() {
    let r = run("verify", "[system]\nkind = linear\nfactors = two\n", &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);
    assert!(r.stderr.contains("column"), "{}", r.stderr);
    assert_eq!(run("verify", "[system]\nkind = linear\ncolour = red\n", &[]).code, 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run("verify", &small_linear(), &["--bogus"]).code, 2);
    assert_eq!(run("pressure", &small_linear(), &["--collection", "X"]).code, 2);
    assert_eq!(run("curve", &small_linear(), &["--t-range", "1:2"]).code, 2);
    let o = Command::new(BIN).arg("nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(BIN).args(["verify", "--config", "/nonexistent/x.ini"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_with_zero_segments_writes_header_only() {
    let r = run("classify", &small_linear(), &["--segments", "0"]);
    assert_eq!(r.code, 0);
    let csv = r.file("segments.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert!(lines[0].starts_with("# schema_version="));
    assert!(lines[1].starts_with("base_0,"));
}

#[test]
fn linear_entropy_summary_is_log_two() {
    let r = run("entropy", &small_linear(), &[]);
    assert_eq!(r.code, 0);
    let p = r.report()["details"]["estimate"]["pressure"].as_f64().unwrap();
    assert!((p - 2f64.ln()).abs() < 0.05, "{p}");
}

#[test]
fn linear_curve_matches_scaling() {
    let r = run("curve", &small_linear(), &["--t-range", "0:1.25:6"]);
    assert_eq!(r.code, 0);
    let csv = r.file("curve.csv");
    let mut rows = 0;
    for line in csv.lines().skip(2) {
        let cols: Vec<f64> = line.split(',').take(2).map(|v| v.parse().unwrap()).collect();
        assert!((cols[1] - (1.0 - cols[0]) * 2f64.ln()).abs() < 1e-6, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
    let root = r.report()["details"]["root"].as_f64().unwrap();
    assert!((root - 1.0).abs() < 1e-6);
}

#[test]
fn every_command_is_deterministic() {
    let cfg = small_linear();
    for cmd in ["verify", "classify", "pressure", "entropy", "spec", "curve", "srb"] {
        // Same output path both times, since it is echoed in the resolved config.
        let a = run(cmd, &cfg, &["--seed", "11"]);
        let fa = artifacts(&a);
        fs::remove_dir_all(a.out()).unwrap();
        let b = run_in(a.dir, cmd, &cfg, &["--seed", "11"]);
        assert_eq!(a.code, b.code, "{cmd}");
        let fb = artifacts(&b);
        assert!(fa.contains_key("report.json") && fa.contains_key("resolved_config.ini"));
        assert_eq!(fa, fb, "{cmd} artifacts differ");
    }
}

#[test]
fn resolved_config_round_trips() {
    let r = run("classify", &small_linear(), &["--seed", "5", "--segments", "3"]);
    let resolved = r.file("resolved_config.ini");
    assert!(resolved.contains("seed = 5"));
    assert!(resolved.contains("segments = 3"));
    let again = thermoformal::config::ExperimentConfig::parse(&resolved).unwrap();
    assert_eq!(again.to_ini(), resolved);
}
