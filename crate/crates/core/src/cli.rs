//! Subcommand orchestration behind the `thermoformal` binary.
//!
//! Each command writes `report.json`, `resolved_config.ini` and its CSVs
//! into the output directory. Output depends only on the resolved
//! configuration, so repeated runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::base::{verify_base_hypotheses, BaseMap, ExpansionProfile};
use crate::config::ExperimentConfig;
use crate::decomposition::{
    contraction_bound_check, decompose_bits, eq1_alpha_bound, is_bad, is_good, sample_good_segments, segments_csv,
    specification_glue, GlueScales, OrbitSegment,
};
use crate::equilibrium::{
    build_transfer_operator, geo_bounds, geo_grid, pressure_curve, srb_check, srb_hypothesis_check,
};
use crate::error::{Error, Result};
use crate::report::{json_f64, CheckEntry, HypothesisReport, SCHEMA_VERSION};
use crate::rng::{stream, stream_rng};
use crate::solenoid::{measure_holonomy_constant, verify_skew_hypotheses, AttractorSample};
use crate::system::System;
use crate::thermo::{
    bad_entropy_bound, bowen_variation, estimate_entropy, estimate_pressure, fmt_f64, psi_bound,
    uniqueness_certificate, variation_gap, Collection, Potential, PotentialKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Classify,
    Pressure,
    Entropy,
    Spec,
    Curve,
    Srb,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Classify => "classify",
            Command::Pressure => "pressure",
            Command::Entropy => "entropy",
            Command::Spec => "spec",
            Command::Curve => "curve",
            Command::Srb => "srb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Command::Verify,
            Command::Classify,
            Command::Pressure,
            Command::Entropy,
            Command::Spec,
            Command::Curve,
            Command::Srb,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub collection: Option<Collection>,
    pub potential: Option<PotentialKind>,
    pub t_range: Option<(f64, f64, usize)>,
    pub segments: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            c.run.seed = s;
        }
        if let Some(o) = &self.out {
            c.run.output_dir = o.clone();
        }
        if let Some(col) = self.collection {
            c.run.collection = col;
        }
        if let Some(p) = self.potential {
            c.run.potential = p;
        }
        if let Some((a, b, n)) = self.t_range {
            c.schedules.t_min = a;
            c.schedules.t_max = b;
            c.schedules.t_steps = n;
        }
        if let Some(n) = self.segments {
            c.budgets.segments = n;
        }
    }
}

/// Exit status: 0 all required checks pass, 1 a check or estimator failed,
/// 2 usage or configuration error.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub report: Value,
}

/// Errors that stem from the configuration rather than the run.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. } | Error::InvalidMap(_) | Error::Inconsistent(_) | Error::H2Violation { .. }
    )
}

pub fn potential_for(c: &ExperimentConfig) -> Potential {
    match c.run.potential {
        PotentialKind::Zero => Potential::zero(),
        PotentialKind::HolderTest => Potential::holder_test(c.run.holder_amplitude, c.run.holder_fiber_weight),
        PotentialKind::Geometric => Potential::geometric(),
    }
}

/// Collected output of one command.
#[derive(Default)]
struct Artifacts {
    checks: HypothesisReport,
    details: Map<String, Value>,
    csvs: Vec<(String, String)>,
}

impl Artifacts {
    fn detail(&mut self, k: &str, v: Value) {
        self.details.insert(k.to_string(), v);
    }

    fn csv(&mut self, name: &str, body: String) {
        let body = if body.starts_with('#') {
            body
        } else {
            format!("# schema_version={SCHEMA_VERSION}\n{body}")
        };
        self.csvs.push((name.to_string(), body));
    }
}

/// Runs `cmd` and writes its artifacts. Configuration errors are returned;
/// failures during the run are recorded in the report with exit code 1.
pub fn run_command(cmd: Command, mut config: ExperimentConfig, overrides: &Overrides) -> Result<Outcome> {
    overrides.apply(&mut config);
    let out_dir = config.run.output_dir.clone();
    let mut art = Artifacts::default();
    let result = match cmd {
        Command::Verify => cmd_verify(&config, &mut art),
        Command::Classify => cmd_classify(&config, &mut art),
        Command::Pressure => cmd_pressure(&config, &mut art, false),
        Command::Entropy => cmd_pressure(&config, &mut art, true),
        Command::Spec => cmd_spec(&config, &mut art),
        Command::Curve => cmd_curve(&config, &mut art),
        Command::Srb => cmd_srb(&config, &mut art),
    };
    let error = match result {
        Ok(()) => None,
        Err(e) if is_config_error(&e) => return Err(e),
        Err(e) => Some(e.to_string()),
    };
    let pass = error.is_none() && art.checks.all_required_pass();
    let mut report = Map::new();
    report.insert("schema_version".into(), json!(SCHEMA_VERSION));
    report.insert("command".into(), json!(cmd.name()));
    report.insert("seed".into(), json!(config.run.seed));
    report.insert("pass".into(), json!(pass));
    if let Some(e) = &error {
        report.insert("error".into(), json!(e));
    }
    report.insert("checks".into(), serde_json::to_value(&art.checks.entries).expect("serializable"));
    report.insert("details".into(), Value::Object(art.details));
    let report = Value::Object(report);
    write_artifacts(&out_dir, &config, &report, &art.csvs)?;
    Ok(Outcome {
        exit_code: if pass { 0 } else { 1 },
        out_dir,
        report,
    })
}

fn write_artifacts(dir: &Path, config: &ExperimentConfig, report: &Value, csvs: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    fs::write(dir.join("resolved_config.ini"), config.to_ini())?;
    for (name, body) in csvs {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn build_system(c: &ExperimentConfig) -> Result<System> {
    System::build(c.system.clone())
}

fn attractor(sys: &System, c: &ExperimentConfig) -> AttractorSample {
    sys.f.attractor_sample(c.budgets.burn_in, c.budgets.attractor_samples, c.run.seed)
}

fn measured_c(sys: &System, sample: &AttractorSample, seed: u64) -> Result<f64> {
    measure_holonomy_constant(&sys.f, sample, 10_000, sys.profile.rho, seed)
}

fn cmd_verify(c: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let seed = c.run.seed;
    let base = &c.system.base;
    let g = BaseMap::new(base.clone())?;
    let profile = ExpansionProfile::build(&g, base.lambda_u, base.rho)?;
    art.detail("profile", profile.to_json());
    match profile.l_global {
        Some(l) => {
            let bound = eq1_alpha_bound(l, base.lambda_u);
            art.checks.push(CheckEntry::strict_upper("eq1_alpha_bound", c.system.alpha, bound));
            if c.system.alpha >= bound {
                return Ok(());
            }
        }
        None => art.checks.push(CheckEntry::upper("eq1_alpha_bound", c.system.alpha, 1.0).with_note("Omega empty")),
    }
    let sys = build_system(c)?;
    art.detail("decomposition_params", serde_json::to_value(&sys.params).expect("serializable"));
    art.checks.extend(verify_base_hypotheses(sys.base(), &sys.profile, seed));
    let sample = attractor(&sys, c);
    let (skew, c_hol) = verify_skew_hypotheses(&sys.f, &sys.profile, &sample, seed)?;
    art.checks.extend(skew);
    art.detail("holonomy_constant", json_f64(c_hol));

    // Uniqueness certificate against the spectral pressure.
    let phi = potential_for(c);
    let bounds = phi.estimate_bounds(&sys.f, &sys.profile, c.budgets.potential_samples, 12, seed)?;
    let psi = psi_bound(&sys.profile, c.system.alpha, &bounds)?;
    let main = build_transfer_operator(&sys.f, &phi, c.budgets.n_cells, c.budgets.quadrature, seed)?;
    let mut gaps = Vec::new();
    let mut spread = 0.0f64;
    for &n in &c.budgets.gap_cells {
        let op = build_transfer_operator(&sys.f, &phi, n, c.budgets.quadrature, seed)?;
        spread = spread.max((op.pressure() - main.pressure()).abs());
        gaps.push(json!({"n_cells": op.grid.len(), "gap_ratio": json_f64(op.gap_ratio), "spectral_gap": json_f64(op.spectral_gap())}));
        if let (Some(first), gap) = (gaps.first(), op.spectral_gap()) {
            let g0 = first["spectral_gap"].as_f64().unwrap_or(gap);
            art.checks.push(
                CheckEntry::lower(&format!("spectral_gap_n{}", op.grid.len()), gap, 0.5 * g0)
                    .with_note("uniqueness proxy: gap stays at least half the coarsest one"),
            );
        }
    }
    let p_bad = if c.verify.bad_pressure {
        let est = estimate_pressure(
            &sys.f,
            &sys.profile,
            c.system.alpha,
            &phi,
            Collection::Bad,
            &c.pressure_schedules(),
            &c.candidate_budget(),
            seed,
        )?;
        art.detail("bad_pressure", est.summary_json());
        Some(est.pressure)
    } else {
        None
    };
    let cert = uniqueness_certificate(psi, main.pressure(), spread, p_bad);
    art.checks.extend(cert.entries());
    art.checks.push(variation_gap(&sys.profile, c.system.alpha, &bounds)?);
    art.detail("potential_bounds", serde_json::to_value(bounds).expect("serializable"));
    art.detail("certificate", serde_json::to_value(&cert).expect("serializable"));
    art.detail("transfer_operator", main.summary_json(crate::equilibrium::equilibrium_measure(&main).invariance_defect));
    art.detail("spectral_gaps", Value::Array(gaps));

    let geo = geo_bounds(sys.base(), &sys.profile, geo_grid(sys.f.dim()));
    let h = srb_hypothesis_check(&sys.profile, c.system.alpha, &geo)?;
    art.checks.push(h.entry().advisory());
    art.detail("srb_hypothesis", serde_json::to_value(&h).expect("serializable"));

    if c.verify.contraction {
        let r = contraction_bound_check(
            &sys.f,
            &sys.profile,
            &sys.params,
            c_hol,
            c.schedules.eta,
            &sample.points,
            c.budgets.contraction_samples,
            20,
            seed,
        )?;
        art.checks.push(CheckEntry::upper("contraction_bound_violations", r.violations as f64, 0.0));
        art.detail("contraction", serde_json::to_value(&r).expect("serializable"));
    }
    if c.verify.bowen {
        let holder = Potential::holder_test(c.run.holder_amplitude, c.run.holder_fiber_weight);
        let r = bowen_variation(
            &sys.f,
            &sys.profile,
            &sys.params,
            &holder,
            c_hol,
            c.schedules.eta,
            &sample.points,
            &c.schedules.bowen_ns,
            c.budgets.bowen_samples,
            seed,
        )?;
        let worst = r.max_observed.iter().copied().fold(0.0, f64::max);
        art.checks.push(CheckEntry::upper("bowen_variation", worst, r.v_bound));
        art.checks.push(CheckEntry::lower("bowen_bounded_in_n", r.bounded_in_n as u8 as f64, 1.0));
        art.detail("bowen", serde_json::to_value(&r).expect("serializable"));
    }
    if c.verify.glue {
        glue_pairs(c, &sys, &sample, c_hol, art)?;
    }
    Ok(())
}

fn glue_pairs(c: &ExperimentConfig, sys: &System, sample: &AttractorSample, c_hol: f64, art: &mut Artifacts) -> Result<()> {
    let scales = GlueScales::new(&sys.f, c_hol, c.schedules.glue_eps)?;
    let pairs = c.budgets.glue_pairs;
    let segs = sample_good_segments(
        &sys.f,
        &sys.profile,
        &sys.params,
        &sample.points,
        2 * pairs,
        c.schedules.segment_length,
        c.run.seed,
    );
    let results: Vec<std::result::Result<(usize, f64), String>> = segs
        .par_chunks(2)
        .filter(|ch| ch.len() == 2)
        .map(|ch| {
            specification_glue(&sys.f, ch, &scales)
                .map(|r| (r.transitions.iter().copied().max().unwrap_or(0), r.max_shadow_error()))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut csv = String::from("pair,transition,max_shadow_error,error\n");
    let (mut failures, mut worst_tau, mut worst_err) = (0usize, 0usize, 0.0f64);
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((t, e)) => {
                worst_tau = worst_tau.max(*t);
                worst_err = worst_err.max(*e);
                csv.push_str(&format!("{i},{t},{},\n", fmt_f64(*e)));
            }
            Err(msg) => {
                failures += 1;
                csv.push_str(&format!("{i},,,{}\n", msg.replace(',', ";")));
            }
        }
    }
    art.checks.push(CheckEntry::upper("spec_glue_failures", failures as f64, 0.0));
    art.checks.push(CheckEntry::upper("spec_transition_le_tau", worst_tau as f64, scales.tau as f64));
    art.checks.push(CheckEntry::upper("spec_shadow_error", worst_err, scales.eps));
    art.detail("glue_scales", serde_json::to_value(scales).expect("serializable"));
    art.detail("glue_pairs", json!(results.len()));
    art.csv("glue.csv", csv);
    Ok(())
}

fn cmd_classify(c: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sys = build_system(c)?;
    let alpha = c.system.alpha;
    let segs: Vec<OrbitSegment> = if c.budgets.segments == 0 {
        Vec::new()
    } else {
        let sample = attractor(&sys, c);
        let mut rng = stream_rng(c.run.seed, stream::CLASSIFY, 7);
        (0..c.budgets.segments)
            .map(|_| {
                let x = sample.points[rng.gen_range(0..sample.points.len())];
                let n = rng.gen_range(1..=c.schedules.segment_length.max(1));
                OrbitSegment::new(&sys.f, &sys.profile, x, n)
            })
            .collect()
    };
    let (mut good, mut bad, mut failures) = (0, 0, 0);
    for s in &segs {
        let bits = &s.itinerary;
        good += is_good(bits, alpha) as usize;
        bad += is_bad(bits, alpha) as usize;
        let k = decompose_bits(bits, alpha);
        let prefix_ok = k == 0 || is_good(&bits[..k], alpha);
        let suffix_ok = k == bits.len() || is_bad(&bits[k..], alpha);
        if !(prefix_ok && suffix_ok) {
            failures += 1;
        }
    }
    art.checks.push(CheckEntry::upper("decomposition_failures", failures as f64, 0.0));
    art.detail("segments", json!(segs.len()));
    art.detail("in_G", json!(good));
    art.detail("in_S", json!(bad));
    art.csv("segments.csv", segments_csv(&segs, sys.f.dim(), alpha));
    Ok(())
}

fn cmd_pressure(c: &ExperimentConfig, art: &mut Artifacts, entropy: bool) -> Result<()> {
    let sys = build_system(c)?;
    let (alpha, seed) = (c.system.alpha, c.run.seed);
    let col = c.run.collection;
    let (sched, budget) = (c.pressure_schedules(), c.candidate_budget());
    let phi = if entropy { Potential::zero() } else { potential_for(c) };
    let est = if entropy {
        estimate_entropy(&sys.f, &sys.profile, alpha, col, &sched, &budget, seed)?
    } else {
        estimate_pressure(&sys.f, &sys.profile, alpha, &phi, col, &sched, &budget, seed)?
    };
    if col == Collection::Bad {
        let bound = if entropy {
            bad_entropy_bound(&sys.profile, alpha)?
        } else {
            let b = phi.estimate_bounds(&sys.f, &sys.profile, c.budgets.potential_samples, 12, seed)?;
            psi_bound(&sys.profile, alpha, &b)?
        };
        let name = if entropy { "bad_entropy_bound" } else { "bad_pressure_le_psi" };
        art.checks.push(CheckEntry::upper(name, est.pressure, bound + 0.05).with_note("tolerance 0.05"));
    } else if entropy && col == Collection::All {
        let target = (sys.profile.deg as f64).ln();
        art.checks.push(
            CheckEntry::upper("entropy_vs_log_deg", (est.pressure - target).abs(), 0.05).advisory(),
        );
    }
    art.detail("estimate", est.summary_json());
    art.csv(if entropy { "entropy.csv" } else { "pressure.csv" }, est.to_csv());
    Ok(())
}

fn cmd_spec(c: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sys = build_system(c)?;
    let sample = attractor(&sys, c);
    let c_hol = measured_c(&sys, &sample, c.run.seed)?;
    art.detail("holonomy_constant", json_f64(c_hol));
    glue_pairs(c, &sys, &sample, c_hol, art)
}

fn cmd_curve(c: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sys = build_system(c)?;
    let curve = pressure_curve(&sys.f, &sys.profile, c.system.alpha, &c.curve_settings(), c.run.seed)?;
    art.checks.extend(curve.checks());
    match curve.root {
        Some(r) => art.checks.push(CheckEntry::upper("curve_root_near_one", (r - 1.0).abs(), 0.1).advisory()),
        None => art.checks.push(
            CheckEntry::upper("curve_root_near_one", f64::INFINITY, 0.1)
                .advisory()
                .with_note("no sign change in the t range"),
        ),
    }
    let below: Vec<f64> = curve.points.iter().filter(|p| p.psi_below_pressure).map(|p| p.t).collect();
    art.detail("root", curve.root.map_or(Value::Null, json_f64));
    art.detail("t0", curve.hypothesis.t0.map_or(Value::Null, json_f64));
    art.detail(
        "psi_below_pressure_range",
        match (below.first(), below.last()) {
            (Some(a), Some(b)) => json!([json_f64(*a), json_f64(*b)]),
            _ => Value::Null,
        },
    );
    art.detail("geo_bounds", serde_json::to_value(curve.geo).expect("serializable"));
    art.detail("srb_hypothesis", serde_json::to_value(&curve.hypothesis).expect("serializable"));
    art.detail("n_cells", json!(curve.n_cells));
    art.csv("curve.csv", curve.to_csv());
    Ok(())
}

fn cmd_srb(c: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sys = build_system(c)?;
    let r = srb_check(&sys.f, &c.srb_settings(), c.run.seed)?;
    art.checks.extend(r.checks());
    let ls = sys.f.lambda_s().ln();
    let fiber_err = r.lyapunov.fiber.iter().map(|l| (l - ls).abs()).fold(0.0, f64::max);
    art.checks.push(CheckEntry::upper("lyapunov_fiber_exact", fiber_err, 1e-10));
    art.detail("srb", serde_json::to_value(&r).expect("serializable"));
    art.csv("srb.csv", r.to_csv());
    Ok(())
}
