//! The geometric pressure curve `t -> P(t phi_geo)` and the margins that
//! place its zero against the bad-entropy bound.

use rayon::prelude::*;
use serde::Serialize;

use super::operator::{CellGrid, OperatorSkeleton, TransferOperatorApprox};
use crate::base::{BaseMap, BaseMapConfig, ExpansionProfile};
use crate::decomposition::eq1_alpha_bound;
use crate::error::{Error, Result};
use crate::report::{ser_f64, CheckEntry, HypothesisReport};
use crate::solenoid::SkewProduct;
use crate::thermo::{bad_entropy_bound, Potential};
use crate::torus::{TorusPoint, MAX_DIM};

/// Extreme values of `phi_geo = -log |det Dg|` on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeoBounds {
    pub sup: f64,
    pub inf: f64,
    /// Over `Omega_rho`; both `NaN` when it is empty.
    #[serde(serialize_with = "ser_f64")]
    pub sup_omega: f64,
    #[serde(serialize_with = "ser_f64")]
    pub inf_omega: f64,
}

fn scan_points(m: usize, per: usize) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(per.pow(m as u32));
    let mut idx = [0usize; MAX_DIM];
    loop {
        let c: Vec<f64> = (0..m).map(|i| idx[i] as f64 / per as f64).collect();
        out.push(TorusPoint::new(&c));
        if !crate::base::advance(&mut idx[..m], per) {
            break;
        }
    }
    out
}

/// Grid resolution per axis used by [`geo_bounds`]; the grid contains the
/// origin, where the perturbation is extremal.
pub fn geo_grid(dim: usize) -> usize {
    match dim {
        1 => 100_000,
        2 => 400,
        _ => 60,
    }
}

pub fn geo_bounds(g: &BaseMap, profile: &ExpansionProfile, per: usize) -> GeoBounds {
    let phi = Potential::geometric();
    let pts = scan_points(g.dim(), per);
    let fold = |acc: (f64, f64, f64, f64), x: &TorusPoint| {
        let v = phi.eval_base(g, x);
        let (mut s, mut i, mut so, mut io) = acc;
        s = s.max(v);
        i = i.min(v);
        if profile.in_omega_rho(x) {
            so = so.max(v);
            io = io.min(v);
        }
        (s, i, so, io)
    };
    let init = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    let (sup, inf, so, io) = pts.par_iter().fold(|| init, fold).reduce(
        || init,
        |a, b| (a.0.max(b.0), a.1.min(b.1), a.2.max(b.2), a.3.min(b.3)),
    );
    let empty = so == f64::NEG_INFINITY;
    GeoBounds {
        sup,
        inf,
        sup_omega: if empty { f64::NAN } else { so },
        inf_omega: if empty { f64::NAN } else { io },
    }
}

/// `log q + eps(alpha) + m log L < min(log deg, -sup phi_geo)`, the
/// condition under which the zero of the geometric curve lies to the right
/// of where the bad bound meets it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrbHypothesis {
    #[serde(serialize_with = "ser_f64")]
    pub lhs: f64,
    pub log_deg: f64,
    pub neg_sup_geo: f64,
    pub rhs: f64,
    #[serde(serialize_with = "ser_f64")]
    pub margin: f64,
    pub holds: bool,
    /// `lhs / (-sup phi_geo)`, where the upper line `l2` crosses zero.
    pub t0: Option<f64>,
}

pub fn srb_hypothesis_check(profile: &ExpansionProfile, alpha: f64, geo: &GeoBounds) -> Result<SrbHypothesis> {
    let lhs = bad_entropy_bound(profile, alpha)?;
    let log_deg = (profile.deg as f64).ln();
    let neg_sup_geo = -geo.sup;
    let rhs = log_deg.min(neg_sup_geo);
    let t0 = (lhs.is_finite() && neg_sup_geo > 0.0).then(|| lhs / neg_sup_geo);
    Ok(SrbHypothesis {
        lhs,
        log_deg,
        neg_sup_geo,
        rhs,
        margin: rhs - lhs,
        holds: lhs < rhs,
        t0,
    })
}

impl SrbHypothesis {
    pub fn entry(&self) -> CheckEntry {
        CheckEntry::strict_upper("srb_bad_entropy_margin", self.lhs, self.rhs)
    }
}

/// One admissible parameter choice found by [`srb_parameter_search`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrbCandidate {
    pub delta: f64,
    pub lambda_u: f64,
    pub alpha: f64,
    pub q: usize,
    pub margin: f64,
    pub t0: Option<f64>,
}

/// Scans `(delta, lambda_u, alpha)` for deformations of `template` that
/// satisfy [`srb_hypothesis_check`] with an admissible `alpha`, best margin first.
pub fn srb_parameter_search(
    template: &BaseMapConfig,
    deltas: &[f64],
    lambda_us: &[f64],
    alphas: &[f64],
) -> Result<Vec<SrbCandidate>> {
    let mut out = Vec::new();
    for &delta in deltas {
        for &lambda_u in lambda_us {
            let mut cfg = template.clone();
            cfg.delta = delta;
            cfg.lambda_u = lambda_u;
            let Ok(g) = BaseMap::new(cfg) else { continue };
            let Ok(profile) = ExpansionProfile::build(&g, lambda_u, template.rho) else { continue };
            let geo = geo_bounds(&g, &profile, geo_grid(g.dim()).min(200));
            for &alpha in alphas {
                if profile.l_global.is_some_and(|l| alpha >= eq1_alpha_bound(l, lambda_u)) {
                    continue;
                }
                let h = srb_hypothesis_check(&profile, alpha, &geo)?;
                if h.holds {
                    out.push(SrbCandidate {
                        delta,
                        lambda_u,
                        alpha,
                        q: profile.q,
                        margin: h.margin,
                        t0: h.t0,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveSettings {
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub n_cells: usize,
    pub quadrature: usize,
}

impl Default for CurveSettings {
    fn default() -> Self {
        CurveSettings {
            t_min: -1.0,
            t_max: 2.0,
            steps: 31,
            n_cells: 1024,
            quadrature: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub pressure: f64,
    /// `log deg + inf(t phi_geo)`.
    pub l1: f64,
    /// `t sup phi_geo + log q + eps(alpha) + m log L`.
    #[serde(serialize_with = "ser_f64")]
    pub l2: f64,
    #[serde(serialize_with = "ser_f64")]
    pub psi: f64,
    pub psi_below_pressure: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureCurve {
    pub points: Vec<CurvePoint>,
    pub geo: GeoBounds,
    pub hypothesis: SrbHypothesis,
    /// Zero of `P(t phi_geo)` by bisection; `None` if the range misses it.
    pub root: Option<f64>,
    pub min_second_difference: f64,
    pub convex: bool,
    pub decreasing: bool,
    pub l1_below: bool,
    pub n_cells: usize,
}

/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOL: f64 = 1e-7;

impl PressureCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,pressure,l1,l2,psi,psi_below_pressure\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.t, p.pressure, p.l1, p.l2, p.psi, p.psi_below_pressure
            ));
        }
        s
    }

    pub fn checks(&self) -> HypothesisReport {
        let mut r = HypothesisReport::default();
        r.push(CheckEntry::lower("curve_convexity", self.min_second_difference, -1e-9));
        let worst_l1 = self.points.iter().map(|p| p.pressure - p.l1).fold(f64::INFINITY, f64::min);
        r.push(CheckEntry::lower("curve_above_l1", worst_l1, -1e-9));
        if self.geo.sup < 0.0 {
            let worst = self
                .points
                .windows(2)
                .map(|w| w[0].pressure - w[1].pressure)
                .fold(f64::INFINITY, f64::min);
            r.push(CheckEntry::lower("curve_decreasing", worst, 0.0));
        }
        r.push(self.hypothesis.entry());
        r
    }
}

fn psi_line(t: f64, alpha: f64, geo: &GeoBounds, tail: f64) -> f64 {
    if tail == f64::NEG_INFINITY {
        return tail;
    }
    let sup = if t >= 0.0 { t * geo.sup } else { t * geo.inf };
    let sup_omega = if geo.sup_omega.is_nan() {
        sup
    } else if t >= 0.0 {
        t * geo.sup_omega
    } else {
        t * geo.inf_omega
    };
    alpha * sup_omega + (1.0 - alpha) * sup + tail
}

/// `P(t phi_geo)` on an evenly spaced grid of `t`, its zero, and the
/// comparison lines.
pub fn pressure_curve(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    alpha: f64,
    settings: &CurveSettings,
    seed: u64,
) -> Result<PressureCurve> {
    if settings.steps < 3 || !(settings.t_max > settings.t_min) {
        return Err(Error::InvalidArgument("need at least 3 steps on a nonempty t range".into()));
    }
    let g = f.base();
    let grid = CellGrid::new(g, settings.n_cells)?;
    let sk = OperatorSkeleton::build(g, grid, settings.quadrature)?;
    let pressure_at = |t: f64| -> Result<f64> {
        let m = sk.assemble(f, &Potential::geometric().scaled(t))?;
        Ok(TransferOperatorApprox::from_matrix(sk.grid.clone(), m, seed).pressure())
    };
    let geo = geo_bounds(g, profile, geo_grid(g.dim()));
    let hypothesis = srb_hypothesis_check(profile, alpha, &geo)?;
    let tail = bad_entropy_bound(profile, alpha)?;
    let log_deg = (profile.deg as f64).ln();
    let dt = (settings.t_max - settings.t_min) / (settings.steps - 1) as f64;
    let ts: Vec<f64> = (0..settings.steps).map(|i| settings.t_min + i as f64 * dt).collect();
    let ps: Result<Vec<f64>> = ts.par_iter().map(|&t| pressure_at(t)).collect();
    let ps = ps?;
    let points: Vec<CurvePoint> = ts
        .iter()
        .zip(&ps)
        .map(|(&t, &p)| {
            let psi = psi_line(t, alpha, &geo, tail);
            CurvePoint {
                t,
                pressure: p,
                l1: log_deg + if t >= 0.0 { t * geo.inf } else { t * geo.sup },
                l2: t * geo.sup + tail,
                psi,
                psi_below_pressure: psi < p,
            }
        })
        .collect();

    let root = match ps.iter().position(|&p| p <= 0.0) {
        Some(i) if i > 0 => {
            let (mut lo, mut hi) = (ts[i - 1], ts[i]);
            while hi - lo > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                if pressure_at(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        }
        Some(_) => (ps[0] == 0.0).then_some(ts[0]),
        None => None,
    };
    let min_second_difference = ps
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::INFINITY, f64::min);
    Ok(PressureCurve {
        convex: min_second_difference >= -1e-9,
        decreasing: ps.windows(2).all(|w| w[1] < w[0]),
        l1_below: points.iter().all(|p| p.l1 <= p.pressure + 1e-9),
        points,
        geo,
        hypothesis,
        root,
        min_second_difference,
        n_cells: sk.grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{System, SystemConfig};

    #[test]
    fn doubling_curve_is_a_line() {
        let s = System::build(SystemConfig::linear_preset()).unwrap();
        let settings = CurveSettings {
            t_min: -1.0,
            t_max: 2.0,
            steps: 7,
            n_cells: 256,
            quadrature: 2,
        };
        let c = pressure_curve(&s.f, &s.profile, 0.8, &settings, 1).unwrap();
        for p in &c.points {
            assert!((p.pressure - (1.0 - p.t) * 2f64.ln()).abs() < 1e-12);
            assert_eq!(p.psi, f64::NEG_INFINITY);
            assert!(p.psi_below_pressure);
        }
        assert!((c.root.unwrap() - 1.0).abs() <= ROOT_TOL);
        assert!(c.convex && c.decreasing && c.l1_below);
        assert!(c.hypothesis.holds && c.hypothesis.t0.is_none());
        assert!(c.checks().all_required_pass());
    }

    #[test]
    fn psi_line_switches_extremes_with_sign() {
        let geo = GeoBounds {
            sup: -0.5,
            inf: -2.0,
            sup_omega: -0.5,
            inf_omega: -1.0,
        };
        assert!((psi_line(1.0, 0.5, &geo, 0.3) - (-0.5 + 0.3)).abs() < 1e-15);
        assert!((psi_line(-1.0, 0.5, &geo, 0.3) - (0.5 * 1.0 + 0.5 * 2.0 + 0.3)).abs() < 1e-15);
    }
}
