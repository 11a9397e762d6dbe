//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use thermoformal::cli::{run_command, Command, Overrides};
use thermoformal::config::ExperimentConfig;
use thermoformal::decomposition::{
    check_concatenation_exhaustive, contraction_bound_check, sample_good_segments, specification_glue, GlueScales,
};
use thermoformal::equilibrium::{
    build_transfer_operator, lyapunov_exponents, pressure_curve, srb_check, CurveSettings, SrbSettings,
};
use thermoformal::system::{System, SystemConfig};
use thermoformal::thermo::{
    bad_entropy_bound, bowen_variation, cylinder_count, estimate_entropy, estimate_pressure, CandidateBudget,
    Collection, PressureSchedules, Potential,
};
use thermoformal::Result;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn linear() -> System {
    System::build(SystemConfig::linear_preset()).unwrap()
}

fn pitchfork() -> System {
    System::build(SystemConfig::pitchfork_preset()).unwrap()
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn entropy_identity() -> Result<Verdict> {
    let s = linear();
    let sched = PressureSchedules {
        epsilons: vec![0.1, 0.05, 0.025],
        ns: (2..=10).collect(),
    };
    let t = Instant::now();
    let est = single_threaded(|| {
        estimate_pressure(&s.f, &s.profile, s.params.alpha, &Potential::zero(), Collection::All, &sched, &CandidateBudget::default(), 1)
    })?;
    let secs = t.elapsed().as_secs_f64();
    let err = est.value_at_scale.iter().map(|v| (v - 2f64.ln()).abs()).fold(0.0, f64::max);
    verdict(
        err <= 0.05 && secs <= 60.0,
        format!("P(0) = {:.4} (max scale error {err:.4}), {secs:.1} s on one thread", est.pressure),
    )
}

fn spectral_exactness() -> Result<Verdict> {
    let s = linear();
    let a = build_transfer_operator(&s.f, &Potential::zero(), 1024, 4, 1)?;
    let mut worst = (a.eigenvalue - 2.0).abs();
    for c in [-1.5, 0.3, 2.0] {
        let b = build_transfer_operator(&s.f, &Potential::constant(c), 1024, 4, 1)?;
        worst = worst.max((b.eigenvalue / c.exp() - a.eigenvalue).abs());
    }
    verdict(worst <= 1e-10, format!("eigenvalue {:.15}, worst deviation {worst:.1e}", a.eigenvalue))
}

fn pressure_curves() -> Result<Verdict> {
    let lin = linear();
    let settings = CurveSettings {
        t_min: 0.0,
        t_max: 1.25,
        steps: 6,
        ..CurveSettings::default()
    };
    let c = pressure_curve(&lin.f, &lin.profile, lin.params.alpha, &settings, 1)?;
    let err = c.points.iter().map(|p| (p.pressure - (1.0 - p.t) * 2f64.ln()).abs()).fold(0.0, f64::max);
    let lin_root = c.root.map_or(f64::INFINITY, |r| (r - 1.0).abs());

    let pf = pitchfork();
    let cfg = ExperimentConfig::pitchfork_preset();
    let p = pressure_curve(&pf.f, &pf.profile, pf.params.alpha, &cfg.curve_settings(), 1)?;
    let root = p.root.unwrap_or(f64::NAN);
    let pass = err <= 1e-6 && lin_root <= 1e-6 && (0.9..=1.1).contains(&root) && p.convex && p.decreasing;
    verdict(
        pass,
        format!(
            "linear max error {err:.1e}, root error {lin_root:.1e}; pitchfork root {root:.5}, convex {}, decreasing {}",
            p.convex, p.decreasing
        ),
    )
}

fn decomposition_calculus() -> Result<Verdict> {
    let t = Instant::now();
    let mut bad = 0;
    let mut checked = 0;
    for alpha in [0.5, 0.6, 0.75] {
        let r = check_concatenation_exhaustive(12, alpha);
        checked += r.checked;
        bad += r.counterexamples.len() + r.decomposition_failures.len();
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(bad == 0 && secs <= 30.0, format!("{checked} cuts, {bad} failures, {secs:.1} s"))
}

fn specification() -> Result<Verdict> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, s) in [("linear", linear()), ("pitchfork", pitchfork())] {
        let c = s.measure_c(1)?;
        let scales = GlueScales::new(&s.f, c, 0.05)?;
        let sample = s.f.attractor_sample(60, 2000, 1);
        let segs = sample_good_segments(&s.f, &s.profile, &s.params, &sample.points, 200, 20, 1);
        let (mut fails, mut worst_tau, mut worst_err) = (0, 0, 0.0f64);
        for pair in segs.chunks(2) {
            match specification_glue(&s.f, pair, &scales) {
                Ok(g) => {
                    worst_tau = worst_tau.max(g.transitions.iter().copied().max().unwrap_or(0));
                    worst_err = worst_err.max(g.max_shadow_error());
                }
                Err(_) => fails += 1,
            }
        }
        pass &= segs.len() == 200 && fails == 0 && worst_tau <= scales.tau && worst_err <= 0.05;
        lines.push(format!("{name}: {} pairs, {fails} failures, tau {worst_tau}/{}, shadow {worst_err:.2e}", segs.len() / 2, scales.tau));
    }
    verdict(pass, lines.join("; "))
}

fn contraction_bound() -> Result<Verdict> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, s) in [("linear", linear()), ("pitchfork", pitchfork())] {
        let c = s.measure_c(1)?;
        let sample = s.f.attractor_sample(60, 2000, 2);
        let r = contraction_bound_check(&s.f, &s.profile, &s.params, c, 0.01, &sample.points, 1000, 20, 3)?;
        pass &= r.samples == 1000 && r.violations == 0;
        lines.push(format!("{name}: {} samples, {} violations, worst ratio {:.3}", r.samples, r.violations, r.max_ratio));
    }
    verdict(pass, lines.join("; "))
}

fn bowen_property() -> Result<Verdict> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, s) in [("linear", linear()), ("pitchfork", pitchfork())] {
        let c = s.measure_c(1)?;
        let sample = s.f.attractor_sample(60, 2000, 2);
        let phi = Potential::holder_test(0.1, 0.05);
        let r = bowen_variation(&s.f, &s.profile, &s.params, &phi, c, 0.01, &sample.points, &[5, 10, 20, 30], 500, 3)?;
        let worst = r.max_observed.iter().copied().fold(0.0, f64::max);
        pass &= worst <= r.v_bound && r.bounded_in_n;
        lines.push(format!("{name}: max {worst:.4} <= V {:.4}, no growth {}", r.v_bound, r.bounded_in_n));
    }
    verdict(pass, lines.join("; "))
}

fn cylinder_counts() -> Result<Verdict> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for alpha in [0.6, 0.75, 0.9] {
        for n in 1..=14 {
            let c = cylinder_count(2, &[0], n, alpha)?;
            violations += !c.holds() as usize;
            worst = worst.max(c.count as f64 / c.bound);
        }
    }
    verdict(violations == 0, format!("{violations} violations, worst count/bound {worst:.3}"))
}

fn bad_pressure() -> Result<Verdict> {
    let s = pitchfork();
    let cfg = ExperimentConfig::pitchfork_preset();
    let est = estimate_entropy(&s.f, &s.profile, s.params.alpha, Collection::Bad, &cfg.pressure_schedules(), &cfg.candidate_budget(), 1)?;
    let bound = bad_entropy_bound(&s.profile, s.params.alpha)?;
    verdict(
        est.pressure <= bound + 0.05,
        format!("h(S) = {:.4} vs bound {bound:.4} + 0.05", est.pressure),
    )
}

fn srb_consistency() -> Result<Verdict> {
    let lin = srb_check(&linear().f, &SrbSettings::default(), 1)?;
    let lin_pesin = lin.pesin.last().map_or(f64::INFINITY, |p| p.residual);
    let pf = srb_check(&pitchfork().f, &ExperimentConfig::pitchfork_preset().srb_settings(), 1)?;
    let residuals: Vec<String> = pf.pesin.iter().map(|p| format!("{:.1e}", p.residual)).collect();
    let pass = lin.max_difference <= 0.01 && lin_pesin <= 1e-4 && pf.max_difference <= 0.05 && pf.pesin_monotone;
    verdict(
        pass,
        format!(
            "linear diff {:.1e}, Pesin residual {lin_pesin:.1e}; pitchfork diff {:.1e}, residuals [{}] monotone {}",
            lin.max_difference,
            pf.max_difference,
            residuals.join(", "),
            pf.pesin_monotone
        ),
    )
}

fn lyapunov_exactness() -> Result<Verdict> {
    let lin = linear();
    let r = lyapunov_exponents(&lin.f, 10_000, 2, 1)?;
    let mut err = (r.base[0] - 2f64.ln()).abs();
    err = r.fiber.iter().fold(err, |e, l| e.max((l + 4f64.ln()).abs()));
    let pf = pitchfork();
    let q = lyapunov_exponents(&pf.f, 10_000, 2, 1)?;
    let fiber = q.fiber.iter().map(|l| (l - pf.f.lambda_s().ln()).abs()).fold(0.0, f64::max);
    verdict(
        err <= 1e-10 && fiber <= 1e-10,
        format!("linear error {err:.1e}, pitchfork fiber error {fiber:.1e}"),
    )
}

fn determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir().map_err(|e| thermoformal::Error::Io(e.to_string()))?;
    let mut differing = Vec::new();
    let commands = [
        Command::Verify,
        Command::Classify,
        Command::Pressure,
        Command::Entropy,
        Command::Spec,
        Command::Curve,
        Command::Srb,
    ];
    for (preset, base) in [("linear", ExperimentConfig::linear_preset()), ("pitchfork", ExperimentConfig::pitchfork_preset())] {
        let mut cfg = base;
        cfg.schedules.ns = vec![2, 4, 6];
        cfg.budgets.steered = 2_000;
        cfg.budgets.max_candidates = 20_000;
        cfg.budgets.n_cells = 512;
        cfg.budgets.pesin_cells = vec![64, 256];
        cfg.budgets.orbit_length = 40_000;
        cfg.budgets.potential_samples = 5_000;
        for cmd in commands {
            let out = dir.path().join(format!("{preset}_{}", cmd.name()));
            let ov = Overrides {
                out: Some(out.clone()),
                ..Overrides::default()
            };
            let mut snapshots = Vec::new();
            for _ in 0..2 {
                run_command(cmd, cfg.clone(), &ov)?;
                let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)?
                    .map(|e| {
                        let e = e.unwrap();
                        (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
                    })
                    .collect();
                files.sort();
                fs::remove_dir_all(&out)?;
                snapshots.push(files);
            }
            if snapshots[0] != snapshots[1] {
                differing.push(format!("{preset}/{}", cmd.name()));
            }
        }
    }
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            "14 command runs repeated byte-identically".into()
        } else {
            format!("differing: {}", differing.join(" "))
        },
    )
}

type Criterion = (&'static str, fn() -> Result<Verdict>);

const CRITERIA: [Criterion; 12] = [
    ("entropy identity on the linear solenoid", entropy_identity),
    ("spectral exactness of the doubling operator", spectral_exactness),
    ("pressure curve and its root", pressure_curves),
    ("decomposition calculus, exhaustive to length 12", decomposition_calculus),
    ("specification gluing", specification),
    ("good-segment contraction bound", contraction_bound),
    ("Bowen property of the Holder potential", bowen_property),
    ("cylinder-count bound", cylinder_counts),
    ("bad-collection entropy bound", bad_pressure),
    ("SRB self-consistency", srb_consistency),
    ("Lyapunov exactness", lyapunov_exactness),
    ("determinism of every command", determinism),
];

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut elapsed = Duration::ZERO;
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let v = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict { pass: false, detail: format!("error: {e}") },
            Err(_) => Verdict { pass: false, detail: "panicked".into() },
        };
        let dt = t.elapsed();
        elapsed += dt;
        failed += !v.pass as usize;
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            dt.as_secs_f64()
        );
    }
    println!("acceptance: {failed} failing, {:.1} s total", elapsed.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
