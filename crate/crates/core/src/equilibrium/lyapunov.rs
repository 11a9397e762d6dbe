//! Lyapunov exponents by repeated QR along an orbit.
//!
//! The Jacobian is block lower triangular: the fiber subspace is invariant
//! and its block is diagonal. Fiber exponents are averages of the logs of
//! that block's diagonal. The base exponents come from QR on the quotient,
//! which is the base block `Dg`. Running QR on the full matrix would not
//! keep the fiber columns inside their subspace: rounding errors grow at
//! the ratio of the expansion to the contraction.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::solenoid::SkewProduct;

const BURN_IN: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// Base exponents, descending.
    pub base: Vec<f64>,
    /// Fiber exponents (two real directions per complex coordinate).
    pub fiber: Vec<f64>,
    /// Sum of the positive exponents.
    pub positive_sum: f64,
    pub orbit_length: usize,
    pub orbits: usize,
}

fn one_orbit(f: &SkewProduct, len: usize, seed: u64, chunk: u64) -> Vec<f64> {
    let m = f.dim();
    let n = 3 * m;
    let mut rng = stream_rng(seed, stream::LYAPUNOV, chunk);
    let mut p = f.random_point(&mut rng);
    for _ in 0..BURN_IN {
        p = f.eval_dithered(&p, &mut rng);
    }
    let mut q = DMatrix::<f64>::identity(m, m);
    // Fiber entries first, then base.
    let mut sums = vec![0.0; n];
    for _ in 0..len {
        let j = f.jacobian(&p);
        for i in 0..2 * m {
            sums[i] += j[(m + i, m + i)].abs().ln();
        }
        let qr = (j.view((0, 0), (m, m)) * &q).qr();
        let r = qr.r();
        for i in 0..m {
            sums[2 * m + i] += r[(i, i)].abs().ln();
        }
        q = qr.q();
        p = f.eval_dithered(&p, &mut rng);
    }
    sums.iter().map(|s| s / len as f64).collect()
}

/// Averages over `orbits` independent orbits of `orbit_length` steps.
pub fn lyapunov_exponents(f: &SkewProduct, orbit_length: usize, orbits: usize, seed: u64) -> Result<LyapunovReport> {
    if orbit_length == 0 || orbits == 0 {
        return Err(Error::InvalidArgument("orbit length and count must be positive".into()));
    }
    let m = f.dim();
    let runs: Vec<Vec<f64>> = (0..orbits)
        .into_par_iter()
        .map(|k| one_orbit(f, orbit_length, seed, k as u64))
        .collect();
    let mean: Vec<f64> = (0..3 * m)
        .map(|i| runs.iter().map(|r| r[i]).sum::<f64>() / orbits as f64)
        .collect();
    let fiber = mean[..2 * m].to_vec();
    let mut base = mean[2 * m..].to_vec();
    base.sort_by(|a, b| b.total_cmp(a));
    let positive_sum = mean.iter().filter(|&&x| x > 0.0).sum();
    Ok(LyapunovReport {
        base,
        fiber,
        positive_sum,
        orbit_length,
        orbits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{System, SystemConfig};

    #[test]
    fn linear_exponents_are_exact() {
        let s = System::build(SystemConfig::linear_preset()).unwrap();
        let r = lyapunov_exponents(&s.f, 10_000, 2, 3).unwrap();
        assert!((r.base[0] - 2f64.ln()).abs() < 1e-10);
        for l in &r.fiber {
            assert!((l - 0.25f64.ln()).abs() < 1e-10);
        }
        assert!((r.positive_sum - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn pitchfork_fiber_exponents_are_exact() {
        let s = System::build(SystemConfig::pitchfork_preset()).unwrap();
        let r = lyapunov_exponents(&s.f, 2_000, 1, 5).unwrap();
        let ls = s.f.lambda_s().ln();
        assert!(r.fiber.iter().all(|l| (l - ls).abs() < 1e-10));
        assert!(r.base[1] > 0.0 && r.base[0] >= r.base[1]);
    }
}
