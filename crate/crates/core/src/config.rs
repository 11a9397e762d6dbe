//! Sectioned `key = value` experiment files.
//!
//! Every key has a default, unknown sections and keys are rejected, and
//! [`ExperimentConfig::to_ini`] writes every key in a fixed order so that
//! parsing the output gives back the same configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::base::MapKind;
use crate::error::{Error, Result};
use crate::equilibrium::{CurveSettings, SrbSettings};
use crate::system::SystemConfig;
use crate::thermo::{CandidateBudget, Collection, PotentialKind, PressureSchedules};
use crate::torus::MAX_DIM;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedules {
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub glue_eps: f64,
    pub eta: f64,
    pub bowen_ns: Vec<usize>,
    pub segment_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Budgets {
    pub attractor_samples: usize,
    pub burn_in: usize,
    pub max_candidates: usize,
    pub steered: usize,
    pub n_cells: usize,
    pub quadrature: usize,
    pub orbit_length: usize,
    pub orbits: usize,
    pub lyapunov_length: usize,
    pub pesin_cells: Vec<usize>,
    pub gap_cells: Vec<usize>,
    pub segments: usize,
    pub glue_pairs: usize,
    pub bowen_samples: usize,
    pub contraction_samples: usize,
    pub potential_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSettings {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub collection: Collection,
    pub potential: PotentialKind,
    pub holder_amplitude: f64,
    pub holder_fiber_weight: f64,
}

/// Optional, costly parts of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySettings {
    pub bad_pressure: bool,
    pub glue: bool,
    pub bowen: bool,
    pub contraction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub schedules: Schedules,
    pub budgets: Budgets,
    pub run: RunSettings,
    pub verify: VerifySettings,
}

impl ExperimentConfig {
    pub fn linear_preset() -> Self {
        Self::with_system(SystemConfig::linear_preset())
    }

    pub fn pitchfork_preset() -> Self {
        let mut c = Self::with_system(SystemConfig::pitchfork_preset());
        c.schedules.ns = vec![6, 8, 10, 12];
        c.budgets.steered = 100_000;
        c
    }

    fn with_system(system: SystemConfig) -> Self {
        ExperimentConfig {
            system,
            schedules: Schedules {
                epsilons: vec![0.1, 0.05, 0.025],
                ns: (2..=10).collect(),
                t_min: -1.0,
                t_max: 2.0,
                t_steps: 31,
                glue_eps: 0.05,
                eta: 0.01,
                bowen_ns: vec![5, 10, 20, 30],
                segment_length: 20,
            },
            budgets: Budgets {
                attractor_samples: 2_000,
                burn_in: 60,
                max_candidates: 2_000_000,
                steered: 200_000,
                n_cells: 4096,
                quadrature: 4,
                orbit_length: 1_000_000,
                orbits: 4,
                lyapunov_length: 100_000,
                pesin_cells: vec![256, 1024, 4096],
                gap_cells: vec![256, 512, 1024],
                segments: 1_000,
                glue_pairs: 100,
                bowen_samples: 500,
                contraction_samples: 1_000,
                potential_samples: 200_000,
            },
            run: RunSettings {
                seed: 1,
                output_dir: PathBuf::from("out"),
                collection: Collection::All,
                potential: PotentialKind::Zero,
                holder_amplitude: 0.1,
                holder_fiber_weight: 0.05,
            },
            verify: VerifySettings {
                bad_pressure: false,
                glue: true,
                bowen: true,
                contraction: true,
            },
        }
    }

    pub fn pressure_schedules(&self) -> PressureSchedules {
        PressureSchedules {
            epsilons: self.schedules.epsilons.clone(),
            ns: self.schedules.ns.clone(),
        }
    }

    pub fn candidate_budget(&self) -> CandidateBudget {
        CandidateBudget {
            max_candidates: self.budgets.max_candidates,
            steered: self.budgets.steered,
        }
    }

    pub fn curve_settings(&self) -> CurveSettings {
        CurveSettings {
            t_min: self.schedules.t_min,
            t_max: self.schedules.t_max,
            steps: self.schedules.t_steps,
            n_cells: self.budgets.n_cells,
            quadrature: self.budgets.quadrature,
        }
    }

    pub fn srb_settings(&self) -> SrbSettings {
        SrbSettings {
            n_cells: self.budgets.n_cells,
            quadrature: self.budgets.quadrature,
            orbit_length: self.budgets.orbit_length,
            orbits: self.budgets.orbits,
            pesin_cells: self.budgets.pesin_cells.clone(),
            lyapunov_length: self.budgets.lyapunov_length,
        }
    }

    /// Canonical text: every key, fixed order, shortest round-trip numbers.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        self.write_sections(&mut s);
        s
    }

    fn write_sections(&self, out: &mut String) {
        let b = &self.system.base;
        let sc = &self.schedules;
        let bu = &self.budgets;
        let r = &self.run;
        let v = &self.verify;
        let sections: Vec<(&str, Vec<(&str, String)>)> = vec![
            (
                "system",
                vec![
                    ("kind", kind_name(b.kind).to_string()),
                    ("factors", list(&b.linear_factors)),
                    ("delta", b.delta.to_string()),
                    ("pert_radius", b.pert_radius.to_string()),
                    ("lambda_u", b.lambda_u.to_string()),
                    ("rho", b.rho.to_string()),
                    ("fiber_contraction", opt(self.system.fiber_contraction_override)),
                    ("fiber_scale", opt(self.system.fiber_scale)),
                ],
            ),
            ("params", vec![("alpha", self.system.alpha.to_string())]),
            (
                "schedules",
                vec![
                    ("epsilons", list(&sc.epsilons)),
                    ("ns", list(&sc.ns)),
                    ("t_range", format!("{}:{}:{}", sc.t_min, sc.t_max, sc.t_steps)),
                    ("glue_eps", sc.glue_eps.to_string()),
                    ("eta", sc.eta.to_string()),
                    ("bowen_ns", list(&sc.bowen_ns)),
                    ("segment_length", sc.segment_length.to_string()),
                ],
            ),
            (
                "budgets",
                vec![
                    ("attractor_samples", bu.attractor_samples.to_string()),
                    ("burn_in", bu.burn_in.to_string()),
                    ("max_candidates", bu.max_candidates.to_string()),
                    ("steered", bu.steered.to_string()),
                    ("n_cells", bu.n_cells.to_string()),
                    ("quadrature", bu.quadrature.to_string()),
                    ("orbit_length", bu.orbit_length.to_string()),
                    ("orbits", bu.orbits.to_string()),
                    ("lyapunov_length", bu.lyapunov_length.to_string()),
                    ("pesin_cells", list(&bu.pesin_cells)),
                    ("gap_cells", list(&bu.gap_cells)),
                    ("segments", bu.segments.to_string()),
                    ("glue_pairs", bu.glue_pairs.to_string()),
                    ("bowen_samples", bu.bowen_samples.to_string()),
                    ("contraction_samples", bu.contraction_samples.to_string()),
                    ("potential_samples", bu.potential_samples.to_string()),
                ],
            ),
            (
                "run",
                vec![
                    ("seed", r.seed.to_string()),
                    ("output_dir", r.output_dir.display().to_string()),
                    ("collection", r.collection.name().to_string()),
                    ("potential", r.potential.name().to_string()),
                    ("holder_amplitude", r.holder_amplitude.to_string()),
                    ("holder_fiber_weight", r.holder_fiber_weight.to_string()),
                ],
            ),
            (
                "verify",
                vec![
                    ("bad_pressure", v.bad_pressure.to_string()),
                    ("glue", v.glue.to_string()),
                    ("bowen", v.bowen.to_string()),
                    ("contraction", v.contraction.to_string()),
                ],
            ),
        ];
        for (i, (name, keys)) in sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in keys {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
    }

    /// Parses a file on top of the defaults of the preset named by
    /// `[system] kind` (linear when absent).
    pub fn parse(text: &str) -> Result<Self> {
        let lines = tokenize(text)?;
        let kind = lines
            .iter()
            .find(|l| l.section == "system" && l.key == "kind")
            .map(parse_kind)
            .transpose()?
            .unwrap_or(MapKind::Linear);
        let mut c = match kind {
            MapKind::Linear => Self::linear_preset(),
            MapKind::Pitchfork => Self::pitchfork_preset(),
        };
        for l in &lines {
            c.apply(l)?;
        }
        c.validate(&lines)?;
        Ok(c)
    }

    fn apply(&mut self, l: &Line) -> Result<()> {
        let b = &mut self.system.base;
        let sc = &mut self.schedules;
        let bu = &mut self.budgets;
        let r = &mut self.run;
        let v = &mut self.verify;
        match (l.section.as_str(), l.key.as_str()) {
            ("system", "kind") => b.kind = parse_kind(l)?,
            ("system", "factors") => {
                b.linear_factors = l.list()?;
                b.m = b.linear_factors.len();
            }
            ("system", "delta") => b.delta = l.num()?,
            ("system", "pert_radius") => b.pert_radius = l.num()?,
            ("system", "lambda_u") => b.lambda_u = l.num()?,
            ("system", "rho") => b.rho = l.num()?,
            ("system", "fiber_contraction") => self.system.fiber_contraction_override = l.opt_num()?,
            ("system", "fiber_scale") => self.system.fiber_scale = l.opt_num()?,
            ("params", "alpha") => self.system.alpha = l.num()?,
            ("schedules", "epsilons") => sc.epsilons = l.list()?,
            ("schedules", "ns") => sc.ns = l.list()?,
            ("schedules", "t_range") => (sc.t_min, sc.t_max, sc.t_steps) = l.t_range()?,
            ("schedules", "glue_eps") => sc.glue_eps = l.num()?,
            ("schedules", "eta") => sc.eta = l.num()?,
            ("schedules", "bowen_ns") => sc.bowen_ns = l.list()?,
            ("schedules", "segment_length") => sc.segment_length = l.num()?,
            ("budgets", "attractor_samples") => bu.attractor_samples = l.num()?,
            ("budgets", "burn_in") => bu.burn_in = l.num()?,
            ("budgets", "max_candidates") => bu.max_candidates = l.num()?,
            ("budgets", "steered") => bu.steered = l.num()?,
            ("budgets", "n_cells") => bu.n_cells = l.num()?,
            ("budgets", "quadrature") => bu.quadrature = l.num()?,
            ("budgets", "orbit_length") => bu.orbit_length = l.num()?,
            ("budgets", "orbits") => bu.orbits = l.num()?,
            ("budgets", "lyapunov_length") => bu.lyapunov_length = l.num()?,
            ("budgets", "pesin_cells") => bu.pesin_cells = l.list()?,
            ("budgets", "gap_cells") => bu.gap_cells = l.list()?,
            ("budgets", "segments") => bu.segments = l.num()?,
            ("budgets", "glue_pairs") => bu.glue_pairs = l.num()?,
            ("budgets", "bowen_samples") => bu.bowen_samples = l.num()?,
            ("budgets", "contraction_samples") => bu.contraction_samples = l.num()?,
            ("budgets", "potential_samples") => bu.potential_samples = l.num()?,
            ("run", "seed") => r.seed = l.num()?,
            ("run", "output_dir") => r.output_dir = PathBuf::from(&l.value),
            ("run", "collection") => {
                r.collection = Collection::parse(&l.value).ok_or_else(|| l.err_value("expected ALL, G or S"))?
            }
            ("run", "potential") => {
                r.potential =
                    PotentialKind::parse(&l.value).ok_or_else(|| l.err_value("expected zero, holder or geo"))?
            }
            ("run", "holder_amplitude") => r.holder_amplitude = l.num()?,
            ("run", "holder_fiber_weight") => r.holder_fiber_weight = l.num()?,
            ("verify", "bad_pressure") => v.bad_pressure = l.num()?,
            ("verify", "glue") => v.glue = l.num()?,
            ("verify", "bowen") => v.bowen = l.num()?,
            ("verify", "contraction") => v.contraction = l.num()?,
            _ => return Err(l.err_key(&format!("unknown key `{}` in [{}]", l.key, l.section))),
        }
        Ok(())
    }

    /// Range checks, reported at the offending key when it was given.
    fn validate(&self, lines: &[Line]) -> Result<()> {
        let at = |section: &str, key: &str, msg: &str| -> Error {
            match lines.iter().rev().find(|l| l.section == section && l.key == key) {
                Some(l) => l.err_value(msg),
                None => Error::Config {
                    line: 0,
                    column: 0,
                    message: format!("[{section}] {key}: {msg}"),
                },
            }
        };
        let b = &self.system.base;
        if b.linear_factors.is_empty() || b.linear_factors.len() > MAX_DIM {
            return Err(at("system", "factors", "need between 1 and 3 factors"));
        }
        if b.linear_factors.iter().any(|&k| k < 2) {
            return Err(at("system", "factors", "factors must be at least 2"));
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(b.lambda_u) {
            return Err(at("system", "lambda_u", "must lie in (0, 1)"));
        }
        if !(b.rho >= 0.0 && b.rho < 0.5) {
            return Err(at("system", "rho", "must lie in [0, 1/2)"));
        }
        if !(b.delta >= 0.0) {
            return Err(at("system", "delta", "must be nonnegative"));
        }
        if !(b.pert_radius > 0.0 && b.pert_radius < 0.5) {
            return Err(at("system", "pert_radius", "must lie in (0, 1/2)"));
        }
        if self.system.fiber_contraction_override.is_some_and(|x| !unit(x)) {
            return Err(at("system", "fiber_contraction", "must lie in (0, 1)"));
        }
        if self.system.fiber_scale.is_some_and(|x| !(x > 0.0)) {
            return Err(at("system", "fiber_scale", "must be positive"));
        }
        if !unit(self.system.alpha) {
            return Err(at("params", "alpha", "must lie in (0, 1)"));
        }
        let sc = &self.schedules;
        if sc.epsilons.is_empty() || sc.epsilons.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(at("schedules", "epsilons", "need values in (0, 1/2)"));
        }
        if sc.ns.len() < 2 || sc.ns.contains(&0) {
            return Err(at("schedules", "ns", "need at least two positive lengths"));
        }
        if !(sc.t_max > sc.t_min) || sc.t_steps < 3 {
            return Err(at("schedules", "t_range", "need a < b and at least 3 steps"));
        }
        if !(sc.glue_eps > 0.0 && sc.glue_eps < 0.5) {
            return Err(at("schedules", "glue_eps", "must lie in (0, 1/2)"));
        }
        if !(sc.eta > 0.0 && sc.eta < 0.5) {
            return Err(at("schedules", "eta", "must lie in (0, 1/2)"));
        }
        if sc.bowen_ns.is_empty() || sc.bowen_ns.contains(&0) {
            return Err(at("schedules", "bowen_ns", "need positive lengths"));
        }
        let bu = &self.budgets;
        if bu.attractor_samples == 0 {
            return Err(at("budgets", "attractor_samples", "must be positive"));
        }
        if bu.n_cells < 2 || bu.pesin_cells.iter().chain(&bu.gap_cells).any(|&n| n < 2) {
            return Err(at("budgets", "n_cells", "cell counts must be at least 2"));
        }
        if bu.quadrature == 0 {
            return Err(at("budgets", "quadrature", "must be positive"));
        }
        if bu.orbits == 0 || bu.orbit_length < bu.orbits {
            return Err(at("budgets", "orbit_length", "must be at least the number of orbits"));
        }
        if bu.lyapunov_length == 0 {
            return Err(at("budgets", "lyapunov_length", "must be positive"));
        }
        if bu.potential_samples == 0 {
            return Err(at("budgets", "potential_samples", "must be positive"));
        }
        Ok(())
    }
}

fn kind_name(k: MapKind) -> &'static str {
    match k {
        MapKind::Linear => "linear",
        MapKind::Pitchfork => "pitchfork",
    }
}

fn parse_kind(l: &Line) -> Result<MapKind> {
    match l.value.as_str() {
        "linear" => Ok(MapKind::Linear),
        "pitchfork" => Ok(MapKind::Pitchfork),
        _ => Err(l.err_value("expected linear or pitchfork")),
    }
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

/// One `key = value` line with its position.
#[derive(Clone, Debug)]
struct Line {
    section: String,
    key: String,
    value: String,
    line: usize,
    key_col: usize,
    value_col: usize,
}

impl Line {
    fn err_key(&self, msg: &str) -> Error {
        Error::Config {
            line: self.line,
            column: self.key_col,
            message: msg.to_string(),
        }
    }

    fn err_value(&self, msg: &str) -> Error {
        Error::Config {
            line: self.line,
            column: self.value_col,
            message: format!("{}: {msg}", self.key),
        }
    }

    fn num<T: std::str::FromStr>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|_| self.err_value(&format!("cannot parse `{}`", self.value)))
    }

    fn opt_num(&self) -> Result<Option<f64>> {
        if self.value == "auto" {
            Ok(None)
        } else {
            self.num().map(Some)
        }
    }

    fn list<T: std::str::FromStr>(&self) -> Result<Vec<T>> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut col = self.value_col;
        for part in self.value.split(',') {
            let lead = part.len() - part.trim_start().len();
            let item = part.trim();
            let v = item.parse().map_err(|_| Error::Config {
                line: self.line,
                column: col + lead,
                message: format!("{}: cannot parse list item `{item}`", self.key),
            })?;
            out.push(v);
            col += part.len() + 1;
        }
        Ok(out)
    }

    fn t_range(&self) -> Result<(f64, f64, usize)> {
        parse_t_range(&self.value).map_err(|m| self.err_value(&m))
    }
}

/// `a:b:n` into `(a, b, n)`.
pub fn parse_t_range(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected a:b:n, got `{s}`"));
    }
    let a = parts[0].trim().parse().map_err(|_| format!("bad start `{}`", parts[0]))?;
    let b = parts[1].trim().parse().map_err(|_| format!("bad end `{}`", parts[1]))?;
    let n = parts[2].trim().parse().map_err(|_| format!("bad count `{}`", parts[2]))?;
    Ok((a, b, n))
}

fn tokenize(text: &str) -> Result<Vec<Line>> {
    const SECTIONS: [&str; 6] = ["system", "params", "schedules", "budgets", "run", "verify"];
    let mut out: Vec<Line> = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split(['#', ';']).next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.len() - body.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(Error::Config {
                    line,
                    column: indent + trimmed.len(),
                    message: "section header missing `]`".into(),
                });
            };
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config {
                    line,
                    column: indent + 2,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(Error::Config {
                line,
                column: indent + 1,
                message: "expected `key = value`".into(),
            });
        };
        let Some(sec) = section.clone() else {
            return Err(Error::Config {
                line,
                column: indent + 1,
                message: "key outside of any section".into(),
            });
        };
        let key = body[..eq].trim().to_string();
        if key.is_empty() {
            return Err(Error::Config {
                line,
                column: indent + 1,
                message: "empty key".into(),
            });
        }
        let after = &body[eq + 1..];
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        if let Some(prev) = out.iter().find(|l| l.section == sec && l.key == key) {
            return Err(Error::Config {
                line,
                column: indent + 1,
                message: format!("duplicate key `{key}` (first on line {})", prev.line),
            });
        }
        out.push(Line {
            section: sec,
            key,
            value: after.trim().to_string(),
            line,
            key_col: indent + 1,
            value_col,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for c in [ExperimentConfig::linear_preset(), ExperimentConfig::pitchfork_preset()] {
            let text = c.to_ini();
            let back = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_ini(), text);
        }
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::parse(
            "# comment\n[system]\nkind = pitchfork\nfactors = 2, 3\n\n[params]\nalpha = 0.7 ; trailing\n[run]\nseed=42\n",
        )
        .unwrap();
        assert_eq!(c.system.base.kind, MapKind::Pitchfork);
        assert_eq!(c.system.alpha, 0.7);
        assert_eq!(c.run.seed, 42);
        assert_eq!(c.schedules.ns, vec![6, 8, 10, 12]);
    }

    fn err(text: &str) -> (usize, usize, String) {
        match ExperimentConfig::parse(text) {
            Err(Error::Config { line, column, message }) => (line, column, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(err("[system]\n  bogus = 1\n").0, 2);
        assert_eq!(err("[system]\n  bogus = 1\n").1, 3);
        let (l, c, m) = err("[params]\nalpha = abc\n");
        assert_eq!((l, c), (2, 9));
        assert!(m.contains("alpha"));
        let (l, c, _) = err("[schedules]\nns = 2, x, 4\n");
        assert_eq!((l, c), (2, 9));
        assert_eq!(err("[nope]\n").0, 1);
        assert_eq!(err("alpha = 0.5\n").1, 1);
        assert_eq!(err("[run]\nseed = 1\nseed = 2\n").0, 3);
        assert_eq!(err("[params]\nalpha = 1.5\n").0, 2);
        assert_eq!(err("[system]\nfactors = 2,2,2,2\n").0, 2);
        assert_eq!(err("[run\n").0, 1);
        assert_eq!(err("[run]\njust words\n").0, 2);
    }

    #[test]
    fn t_range_parsing() {
        assert_eq!(parse_t_range("0:1.25:6"), Ok((0.0, 1.25, 6)));
        assert!(parse_t_range("0:1").is_err());
    }

    #[test]
    fn shipped_presets_match_emitter() {
        assert_eq!(include_str!("../presets/linear.ini"), ExperimentConfig::linear_preset().to_ini());
        assert_eq!(include_str!("../presets/pitchfork.ini"), ExperimentConfig::pitchfork_preset().to_ini());
    }
}
