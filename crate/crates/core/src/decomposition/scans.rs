//! Sampling checks along good segments: the two-term contraction estimate
//! and the search for non-expansive companions.

use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::{birkhoff_fraction, is_good, DecompositionParams, OrbitSegment};
use crate::base::ExpansionProfile;
use crate::error::Result;
use crate::rng::{stream, stream_rng};
use crate::solenoid::{cis, SkewProduct, SolenoidPoint};
use crate::torus::MAX_DIM;

const SCAN_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub samples: usize,
    pub comparisons: usize,
    /// `max d(f^k x, f^k y) / (C eta (theta^{n-k} + lambda_s^k))`.
    pub max_ratio: f64,
    pub violations: usize,
}

#[derive(Clone, Copy)]
enum Direction {
    Fiber,
    Base,
    Mixed,
}

/// Builds `y` near `x` whose orbit stays `eta`-close for `n` steps.
fn perturb(
    f: &SkewProduct,
    orbit: &[SolenoidPoint],
    dir: Direction,
    amp: f64,
    rng: &mut crate::rng::Rng,
) -> Result<SolenoidPoint> {
    let g = f.base();
    let m = f.dim();
    let n = orbit.len() - 1;
    let x = orbit[0];
    let (a_fib, a_base) = match dir {
        Direction::Fiber => (amp, 0.0),
        Direction::Base => (0.0, 0.5 * amp),
        Direction::Mixed => (0.5 * amp, 0.25 * amp),
    };
    let mut y = x;
    if a_base > 0.0 {
        let mut d = [0.0; MAX_DIM];
        for v in d.iter_mut().take(m) {
            *v = rng.gen_range(-a_base..a_base);
        }
        let mut w = orbit[n].base.offset(&d[..m]);
        for k in (0..n).rev() {
            w = g.closest_preimage(&w, &orbit[k].base)?.1;
        }
        y = f.holonomy(&x.base, &w, &x)?;
    }
    if a_fib > 0.0 {
        for z in y.fiber_mut() {
            *z += a_fib * rng.gen::<f64>() * cis(rng.gen::<f64>());
        }
    }
    Ok(y)
}

/// A point `y` in the Bowen ball `B_n(x, eta)` around `orbit = [x, ..., f^n x]`,
/// returned as its trajectory `y, ..., f^{n-1} y`. The perturbation
/// direction cycles with `k` through fiber, base and mixed (1:1:2).
/// Amplitudes start at `0.9 eta` and halve up to 20 times.
pub(crate) fn bowen_companion(
    f: &SkewProduct,
    orbit: &[SolenoidPoint],
    k: usize,
    eta: f64,
    rng: &mut crate::rng::Rng,
) -> Result<Option<Vec<SolenoidPoint>>> {
    let n = orbit.len() - 1;
    let dir = match k % 4 {
        0 => Direction::Fiber,
        1 => Direction::Base,
        _ => Direction::Mixed,
    };
    let mut amp = 0.9 * eta;
    for _ in 0..20 {
        let y = perturb(f, orbit, dir, amp, rng)?;
        let mut cur = y;
        let mut traj = Vec::with_capacity(n);
        let mut inside = true;
        for x in orbit.iter().take(n) {
            if x.dist(&cur) >= eta {
                inside = false;
                break;
            }
            traj.push(cur);
            cur = f.eval(&cur);
        }
        if inside {
            return Ok(Some(traj));
        }
        amp *= 0.5;
    }
    Ok(None)
}

/// Samples good segments `(x, n)` and `y` in the Bowen ball `B_n(x, eta)`,
/// and compares `d(f^k x, f^k y)` with `C eta (theta^{n-k} + lambda_s^k)`.
///
/// Perturbation directions are pure fiber, pure base (pulled back along the
/// segment) and mixed, in ratio 1:1:2.
#[allow(clippy::too_many_arguments)]
pub fn contraction_bound_check(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    params: &DecompositionParams,
    c_holonomy: f64,
    eta: f64,
    starts: &[SolenoidPoint],
    num_samples: usize,
    max_n: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let chunks = num_samples.div_ceil(SCAN_CHUNK);
    let parts: Vec<Result<(usize, usize, f64, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream::CONTRACTION, c as u64 + 1);
            let (mut samples, mut comps, mut worst, mut bad) = (0, 0, 0.0f64, 0);
            let len = SCAN_CHUNK.min(num_samples - c * SCAN_CHUNK);
            for i in 0..len {
                let seg = loop {
                    let x = starts[rng.gen_range(0..starts.len())];
                    let n = rng.gen_range(1..=max_n);
                    let seg = OrbitSegment::new(f, profile, x, n);
                    if is_good(&seg.itinerary, params.alpha) {
                        break seg;
                    }
                };
                let orbit = seg.orbit(f);
                let n = seg.len();
                let Some(traj) = bowen_companion(f, &orbit, c * SCAN_CHUNK + i, eta, &mut rng)? else {
                    continue;
                };
                samples += 1;
                for k in 0..n {
                    let rhs = c_holonomy
                        * eta
                        * (params.theta.powi((n - k) as i32) + params.lambda_s.powi(k as i32));
                    let r = orbit[k].dist(&traj[k]) / rhs;
                    comps += 1;
                    worst = worst.max(r);
                    if r > 1.0 {
                        bad += 1;
                    }
                }
            }
            Ok((samples, comps, worst, bad))
        })
        .collect();
    let mut rep = ContractionReport {
        samples: 0,
        comparisons: 0,
        max_ratio: 0.0,
        violations: 0,
    };
    for p in parts {
        let (s, c, w, b) = p?;
        rep.samples += s;
        rep.comparisons += c;
        rep.max_ratio = rep.max_ratio.max(w);
        rep.violations += b;
    }
    Ok(rep)
}

/// Whether the net point `idx` around `traj[burn]` stays `eps`-close for
/// `|k| <= horizon`.
///
/// Backward fibers are tracked as differences from `x`'s past,
/// `D_{-k} = (D_{-k+1} - s (e(y_{-k}) - e(x_{-k}))) / lambda_s`, so that the
/// `lambda_s^{-k}` blow-up acts only on the genuine separation.
fn companion_survives(
    f: &SkewProduct,
    traj: &[SolenoidPoint],
    burn: usize,
    horizon: usize,
    eps: f64,
    idx: &[usize],
    steps: &[f64; 3],
) -> Result<bool> {
    let g = f.base();
    let m = f.dim();
    let x = traj[burn];
    let mut base_d = [0.0; MAX_DIM];
    for i in 0..m {
        base_d[i] = steps[idx[i]];
    }
    let mut y = x;
    y.base = x.base.offset(&base_d[..m]);
    let mut diff = [Complex64::new(0.0, 0.0); MAX_DIM];
    for (i, z) in y.fiber_mut().iter_mut().enumerate() {
        diff[i] = Complex64::new(steps[idx[m + 2 * i]], steps[idx[m + 2 * i + 1]]);
        *z += diff[i];
    }
    let y0 = y;
    for p in &traj[burn + 1..=burn + horizon] {
        y = f.eval(&y);
        if p.dist(&y) >= eps {
            return Ok(false);
        }
    }
    let mut yb = y0.base;
    for k in 1..=horizon {
        let xp = traj[burn - k].base;
        yb = g.closest_preimage(&yb, &xp)?.1;
        let mut d = yb.dist(&xp);
        for i in 0..m {
            diff[i] = (diff[i] - f.fiber_scale() * (cis(yb.get(i)) - cis(xp.get(i)))) / f.lambda_s();
            d = d.max(diff[i].norm());
        }
        if d >= eps {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonexpansiveReport {
    pub samples: usize,
    /// Samples with `beta(x, T) <= alpha`.
    pub eligible: usize,
    /// Eligible samples with an `eps`-companion for all `|k| <= T`.
    pub survivors: usize,
    pub survival_fraction: f64,
}

/// Grid-net search for two-sided `eps`-companions of sampled attractor points.
///
/// The net has spacing `eps / 2` in every base and fiber coordinate; the
/// companion's past follows `x`'s own inverse branches.
#[allow(clippy::too_many_arguments)]
pub fn nonexpansive_scan(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    alpha: f64,
    eps: f64,
    num_samples: usize,
    horizon: usize,
    burn_in: usize,
    seed: u64,
) -> Result<NonexpansiveReport> {
    let m = f.dim();
    let burn = burn_in.max(horizon);
    let steps = [-0.5 * eps, 0.0, 0.5 * eps];
    let dims = 3 * m;
    let chunks = num_samples.div_ceil(SCAN_CHUNK);
    let parts: Vec<Result<(usize, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream::NONEXPANSIVE, c as u64);
            let (mut eligible, mut survivors) = (0, 0);
            let len = SCAN_CHUNK.min(num_samples - c * SCAN_CHUNK);
            for _ in 0..len {
                let start = f.random_point(&mut rng);
                let traj = f.orbit(&start, burn + horizon + 1, &mut rng);
                let bits: Vec<bool> = traj[burn..burn + horizon]
                    .iter()
                    .map(|p| profile.in_omega_rho(&p.base))
                    .collect();
                if birkhoff_fraction(&bits)? > alpha {
                    continue;
                }
                eligible += 1;
                let mut idx = vec![0usize; dims];
                let mut found = false;
                loop {
                    // Index 1 is the zero step; the all-zero offset is `x` itself.
                    if idx.iter().any(|&i| i != 1) && companion_survives(f, &traj, burn, horizon, eps, &idx, &steps)? {
                        found = true;
                        break;
                    }
                    if !crate::base::advance(&mut idx, 3) {
                        break;
                    }
                }
                if found {
                    survivors += 1;
                }
            }
            Ok((eligible, survivors))
        })
        .collect();
    let (mut eligible, mut survivors) = (0, 0);
    for p in parts {
        let (e, s) = p?;
        eligible += e;
        survivors += s;
    }
    Ok(NonexpansiveReport {
        samples: num_samples,
        eligible,
        survivors,
        survival_fraction: if eligible == 0 { 0.0 } else { survivors as f64 / eligible as f64 },
    })
}
