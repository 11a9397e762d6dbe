//! SRB diagnostics: the equilibrium state of `phi_geo` against time
//! averages from Lebesgue-random starts, and the entropy formula.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::lyapunov::{lyapunov_exponents, LyapunovReport};
use super::operator::{equilibrium_measure, CellGrid, MeasureApprox, OperatorSkeleton, TransferOperatorApprox};
use crate::error::{Error, Result};
use crate::report::{CheckEntry, HypothesisReport};
use crate::rng::{stream, stream_rng};
use crate::solenoid::{SkewProduct, SolenoidPoint};
use crate::thermo::Potential;
use crate::torus::TorusPoint;

const BURN_IN: usize = 1_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrbSettings {
    pub n_cells: usize,
    pub quadrature: usize,
    /// Total orbit length, split evenly across `orbits`.
    pub orbit_length: usize,
    pub orbits: usize,
    /// Grid sizes for the entropy-formula residual trend.
    pub pesin_cells: Vec<usize>,
    pub lyapunov_length: usize,
}

impl Default for SrbSettings {
    fn default() -> Self {
        SrbSettings {
            n_cells: 4096,
            quadrature: 4,
            orbit_length: 1_000_000,
            orbits: 4,
            pesin_cells: vec![256, 1024, 4096],
            lyapunov_length: 100_000,
        }
    }
}

/// The five test observables. Two use the fiber.
pub const OBSERVABLES: [&str; 5] = ["cos_x0", "sin_x0", "cos_x0_plus_xlast", "re_z0", "im_z0"];

fn base_observable(k: usize, x: &TorusPoint) -> f64 {
    let last = x.get(x.dim() - 1);
    match k {
        0 => (2.0 * PI * x.get(0)).cos(),
        1 => (2.0 * PI * x.get(0)).sin(),
        _ => (2.0 * PI * (x.get(0) + last)).cos(),
    }
}

fn observable(k: usize, p: &SolenoidPoint) -> f64 {
    match k {
        3 => p.fiber()[0].re,
        4 => p.fiber()[0].im,
        _ => base_observable(k, &p.base),
    }
}

/// `int u d mu` for each observable. On an invariant measure the fiber
/// coordinate averages to `s / (1 - lambda_s)` times the mean of
/// `exp(2 pi i x_0)`.
fn space_averages(f: &SkewProduct, mu: &MeasureApprox, s: usize) -> [f64; 5] {
    let k = f.fiber_scale() / (1.0 - f.lambda_s());
    let mut out = [0.0; 5];
    for (i, o) in out.iter_mut().enumerate().take(3) {
        *o = mu.integrate(s, |x| base_observable(i, x));
    }
    out[3] = k * out[0];
    out[4] = k * out[1];
    out
}

fn time_averages(f: &SkewProduct, total: usize, orbits: usize, seed: u64) -> [f64; 5] {
    let len = total.div_ceil(orbits);
    let runs: Vec<[f64; 5]> = (0..orbits)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream::SRB, c as u64);
            let mut p = f.random_point(&mut rng);
            for _ in 0..BURN_IN {
                p = f.eval_dithered(&p, &mut rng);
            }
            let mut acc = [0.0; 5];
            for _ in 0..len {
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += observable(k, &p);
                }
                p = f.eval_dithered(&p, &mut rng);
            }
            acc.map(|a| a / len as f64)
        })
        .collect();
    let mut out = [0.0; 5];
    for r in &runs {
        for k in 0..5 {
            out[k] += r[k] / orbits as f64;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableCheck {
    pub name: String,
    pub space_average: f64,
    pub time_average: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PesinPoint {
    pub n_cells: usize,
    pub pressure_at_one: f64,
    /// `P(phi_geo) - int phi_geo d mu_1`.
    pub entropy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrbReport {
    pub n_cells: usize,
    pub observables: Vec<ObservableCheck>,
    pub max_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub lyapunov: LyapunovReport,
    pub pesin: Vec<PesinPoint>,
    /// Residuals do not increase with the grid size.
    pub pesin_monotone: bool,
    pub invariance_defect: f64,
    /// `P(0)`, the topological entropy of the discretized operator.
    pub topological_entropy: f64,
}

impl SrbReport {
    pub fn checks(&self) -> HypothesisReport {
        let mut r = HypothesisReport::default();
        r.push(CheckEntry::upper("srb_time_vs_space", self.max_difference, self.tolerance));
        if let Some(p) = self.pesin.last() {
            r.push(CheckEntry::upper("srb_entropy_formula", p.residual, 1e-4).advisory());
        }
        r.push(CheckEntry::upper(
            "margulis_ruelle",
            self.topological_entropy,
            self.lyapunov.positive_sum + 0.05,
        ));
        r
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("observable,space_average,time_average,difference\n");
        for o in &self.observables {
            s.push_str(&format!("{},{},{},{}\n", o.name, o.space_average, o.time_average, o.difference));
        }
        s
    }
}

/// Agreement tolerance: linear maps are checked at 0.01, deformed ones at 0.05.
pub fn srb_tolerance(f: &SkewProduct) -> f64 {
    if f.base().is_perturbed() {
        0.05
    } else {
        0.01
    }
}

fn geometric_state(f: &SkewProduct, n_cells: usize, quadrature: usize, seed: u64) -> Result<(TransferOperatorApprox, MeasureApprox)> {
    let grid = CellGrid::new(f.base(), n_cells)?;
    let sk = OperatorSkeleton::build(f.base(), grid, quadrature)?;
    let op = TransferOperatorApprox::from_matrix(sk.grid.clone(), sk.assemble(f, &Potential::geometric())?, seed);
    let mu = equilibrium_measure(&op);
    Ok((op, mu))
}

pub fn srb_check(f: &SkewProduct, settings: &SrbSettings, seed: u64) -> Result<SrbReport> {
    if settings.orbits == 0 || settings.orbit_length < settings.orbits {
        return Err(Error::InvalidArgument("orbit length must cover every orbit".into()));
    }
    let (op, mu) = geometric_state(f, settings.n_cells, settings.quadrature, seed)?;
    let space = space_averages(f, &mu, settings.quadrature);
    let time = time_averages(f, settings.orbit_length, settings.orbits, seed);
    let observables: Vec<ObservableCheck> = OBSERVABLES
        .iter()
        .enumerate()
        .map(|(k, name)| ObservableCheck {
            name: name.to_string(),
            space_average: space[k],
            time_average: time[k],
            difference: (space[k] - time[k]).abs(),
        })
        .collect();
    let max_difference = observables.iter().map(|o| o.difference).fold(0.0, f64::max);
    let tolerance = srb_tolerance(f);

    let lyapunov = lyapunov_exponents(f, settings.lyapunov_length, settings.orbits, seed)?;
    let geo = Potential::geometric();
    let mut pesin = Vec::with_capacity(settings.pesin_cells.len());
    for &n in &settings.pesin_cells {
        let (op_n, mu_n) = geometric_state(f, n, settings.quadrature, seed)?;
        let p = op_n.pressure();
        let entropy = p - mu_n.integrate(settings.quadrature, |x| geo.eval_base(f.base(), x));
        pesin.push(PesinPoint {
            n_cells: op_n.grid.len(),
            pressure_at_one: p,
            entropy,
            residual: (entropy - lyapunov.positive_sum).abs(),
        });
    }
    let pesin_monotone = pesin.windows(2).all(|w| w[1].residual <= w[0].residual + 1e-12);
    let grid = CellGrid::new(f.base(), settings.n_cells.min(1024))?;
    let sk = OperatorSkeleton::build(f.base(), grid, 1)?;
    let topological_entropy =
        TransferOperatorApprox::from_matrix(sk.grid.clone(), sk.assemble(f, &Potential::zero())?, seed).pressure();
    Ok(SrbReport {
        n_cells: op.grid.len(),
        pass: max_difference <= tolerance,
        observables,
        max_difference,
        tolerance,
        lyapunov,
        pesin,
        pesin_monotone,
        invariance_defect: mu.invariance_defect,
        topological_entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{System, SystemConfig};

    #[test]
    fn doubling_srb_is_lebesgue() {
        let s = System::build(SystemConfig::linear_preset()).unwrap();
        let settings = SrbSettings {
            n_cells: 512,
            quadrature: 2,
            orbit_length: 200_000,
            orbits: 2,
            pesin_cells: vec![64, 256],
            lyapunov_length: 2_000,
        };
        let r = srb_check(&s.f, &settings, 4).unwrap();
        for o in &r.observables {
            assert!(o.space_average.abs() < 1e-12, "{o:?}");
        }
        assert!(r.max_difference < 0.02);
        for p in &r.pesin {
            assert!(p.pressure_at_one.abs() < 1e-12);
            assert!(p.residual < 1e-10, "{p:?}");
        }
        assert!((r.topological_entropy - 2f64.ln()).abs() < 1e-12);
        assert!(r.checks().all_required_pass());
    }
}
