//! Constructive specification: glue good segments into one true orbit.
//!
//! The orbit is built backwards. The last segment is taken as is; each
//! earlier junction pulls back `tau_s` steps along the next segment's own
//! past (so the fibers agree), then bridges to the end of the previous
//! segment through a short inverse-branch word, then follows the previous
//! segment's branches back to its start.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::OrbitSegment;
use crate::base::BaseMap;
use crate::error::{Error, Result};
use crate::solenoid::{cis, SkewProduct, SolenoidPoint};
use crate::torus::{TorusPoint, MAX_DIM};

/// Depth limit for the bridging search.
const MAX_BRIDGE_DEPTH: usize = 40;

/// Scales derived from the shadowing tolerance `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlueScales {
    pub eps: f64,
    /// Base tolerance used for bridging and pullbacks.
    pub delta: f64,
    pub tau_base: usize,
    pub tau_s: usize,
    /// `tau(eps) = tau_base + tau_s`.
    pub tau: usize,
}

impl GlueScales {
    /// `c_holonomy` is the measured product-structure constant.
    pub fn new(f: &SkewProduct, c_holonomy: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidArgument("eps must lie in (0, 1/2)".into()));
        }
        let ls = f.lambda_s();
        // Base errors of size delta move fibers by at most 2 pi s delta / (1 - ls);
        // keep that below 0.4 eps.
        let delta = (0.8 * eps * (1.0 - ls) / (4.0 * PI * f.fiber_scale())).min(0.5 * eps);
        let log_inv = -ls.ln();
        let by_c = ((2.0 * c_holonomy / eps).ln() / log_inv).ceil();
        let by_radius = ((8.0 * f.attractor_radius() / eps).ln() / log_inv).ceil();
        let tau_s = by_c.max(by_radius).max(1.0) as usize;
        let tau_base = base_transition_time(f.base(), delta)?;
        Ok(GlueScales {
            eps,
            delta,
            tau_base,
            tau_s,
            tau: tau_base + tau_s,
        })
    }
}

/// Candidate inverse-branch words near `c`: forward itineraries of `c` and of
/// the corners of a box of half-width `radius / 2` around it.
fn candidate_words(g: &BaseMap, c: &TorusPoint, radius: f64, depth: usize) -> Vec<Vec<usize>> {
    let m = g.dim();
    let offsets = [-0.5, 0.0, 0.5];
    let mut words = Vec::new();
    let mut idx = [0usize; MAX_DIM];
    loop {
        let d: Vec<f64> = (0..m).map(|i| offsets[idx[i]] * radius).collect();
        let mut p = c.offset(&d);
        words.push(
            (0..depth)
                .map(|_| {
                    let b = g.branch_of(&p);
                    p = g.eval(&p);
                    b
                })
                .collect(),
        );
        if !crate::base::advance(&mut idx[..m], offsets.len()) {
            break;
        }
    }
    words
}

/// Shortest inverse-branch chain from `y` landing within `radius` of `c`,
/// trying the given candidate words. Returns `[g^{-1} y, g^{-2} y, ...]`.
fn bridge_with(
    g: &BaseMap,
    y: &TorusPoint,
    c: &TorusPoint,
    radius: f64,
    words: &[Vec<usize>],
    max_depth: usize,
) -> Result<Option<Vec<TorusPoint>>> {
    for depth in 1..=max_depth {
        let mut best: Option<(f64, Vec<TorusPoint>)> = None;
        for word in words {
            let mut chain = Vec::with_capacity(depth);
            let mut p = *y;
            for i in (0..depth).rev() {
                p = g.preimage(&p, word[i])?;
                chain.push(p);
            }
            let d = p.dist(c);
            if d < radius && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, chain));
            }
        }
        if let Some((_, chain)) = best {
            return Ok(Some(chain));
        }
    }
    Ok(None)
}

fn bridge(g: &BaseMap, y: &TorusPoint, c: &TorusPoint, radius: f64, max_depth: usize) -> Result<Option<Vec<TorusPoint>>> {
    let words = candidate_words(g, c, radius, max_depth);
    bridge_with(g, y, c, radius, &words, max_depth)
}

/// Smallest depth that bridges every target of a net to every ball of
/// radius `radius / 2` around a net of centres, plus one.
pub fn base_transition_time(g: &BaseMap, radius: f64) -> Result<usize> {
    let m = g.dim();
    let per_c = ((1.0 / (4.0 * radius)).ceil() as usize).clamp(2, if m == 1 { 64 } else { 12 });
    let per_y = if m == 1 { 64 } else { 12 };
    let net = |per: usize, shift: f64| -> Vec<TorusPoint> {
        let mut out = Vec::new();
        let mut idx = [0usize; MAX_DIM];
        loop {
            let c: Vec<f64> = (0..m).map(|i| (idx[i] as f64 + shift) / per as f64).collect();
            out.push(TorusPoint::new(&c));
            if !crate::base::advance(&mut idx[..m], per) {
                break;
            }
        }
        out
    };
    let centers = net(per_c, 0.37);
    let targets = net(per_y, 0.61);
    let depths: Vec<Result<usize>> = centers
        .par_iter()
        .map(|c| {
            let mut worst = 0;
            let words = candidate_words(g, c, 0.5 * radius, MAX_BRIDGE_DEPTH);
            for y in &targets {
                match bridge_with(g, y, c, 0.5 * radius, &words, MAX_BRIDGE_DEPTH)? {
                    Some(chain) => worst = worst.max(chain.len()),
                    None => {
                        return Err(Error::Glue(format!(
                            "no bridge within depth {MAX_BRIDGE_DEPTH} at radius {radius}"
                        )))
                    }
                }
            }
            Ok(worst)
        })
        .collect();
    let mut worst = 0;
    for d in depths {
        worst = worst.max(d?);
    }
    Ok(worst + 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct GlueResult {
    pub z: SolenoidPoint,
    pub transitions: Vec<usize>,
    pub tau_bound: usize,
    pub shadow_errors: Vec<f64>,
    /// Start time of each segment along the orbit of `z`.
    pub offsets: Vec<usize>,
    /// `max_t d_N(g(z_t), z_{t+1})` over the stored base orbit.
    pub pseudo_orbit_error: f64,
    #[serde(skip)]
    pub orbit: Vec<SolenoidPoint>,
}

impl GlueResult {
    pub fn max_shadow_error(&self) -> f64 {
        self.shadow_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Glues good segments into one orbit shadowing each within `scales.eps`.
pub fn specification_glue(f: &SkewProduct, segments: &[OrbitSegment], scales: &GlueScales) -> Result<GlueResult> {
    let g = f.base();
    let k = segments.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no segments to glue".into()));
    }
    let orbits: Vec<Vec<SolenoidPoint>> = segments.iter().map(|s| s.orbit(f)).collect();

    // Reversed base orbit of z, built from the last time backwards.
    let mut rev: Vec<TorusPoint> = orbits[k - 1].iter().rev().map(|p| p.base).collect();
    let mut transitions = vec![0usize; k - 1];
    for j in (1..k).rev() {
        let past = f.recover_history(&segments[j].start, scales.tau_s)?;
        let mut w = *rev.last().expect("nonempty");
        for x in &past.bases {
            w = g.closest_preimage(&w, x)?.1;
            rev.push(w);
        }
        let prev = &orbits[j - 1];
        let end = prev.last().expect("nonempty").base;
        let chain = bridge(g, &w, &end, scales.delta, scales.tau_base)?.ok_or_else(|| {
            Error::Glue(format!(
                "transition search exhausted depth {} before segment {j}",
                scales.tau_base
            ))
        })?;
        transitions[j - 1] = scales.tau_s + chain.len();
        rev.extend_from_slice(&chain);
        w = *rev.last().expect("nonempty");
        for mstep in (0..segments[j - 1].len()).rev() {
            let target = prev[mstep].base;
            w = g.closest_preimage(&w, &target)?.1;
            if w.dist(&target) > scales.eps {
                return Err(Error::Glue(format!(
                    "pullback left the injectivity domain in segment {}",
                    j - 1
                )));
            }
            rev.push(w);
        }
    }
    rev.reverse();
    let base_orbit = rev;

    let mut offsets = vec![0usize; k];
    for j in 1..k {
        offsets[j] = offsets[j - 1] + segments[j - 1].len() + transitions[j - 1];
    }

    let m = f.dim();
    let mut fiber = [Complex64::new(0.0, 0.0); MAX_DIM];
    fiber[..m].copy_from_slice(segments[0].start.fiber());
    let mut orbit = Vec::with_capacity(base_orbit.len());
    let mut pseudo = 0.0f64;
    for (t, b) in base_orbit.iter().enumerate() {
        orbit.push(SolenoidPoint::new(*b, &fiber[..m]));
        for i in 0..m {
            fiber[i] = f.lambda_s() * fiber[i] + f.fiber_scale() * cis(b.get(i));
        }
        if t + 1 < base_orbit.len() {
            pseudo = pseudo.max(g.eval(b).dist(&base_orbit[t + 1]));
        }
    }
    let shadow_errors = (0..k)
        .map(|j| {
            orbits[j]
                .iter()
                .enumerate()
                .map(|(mstep, p)| p.dist(&orbit[offsets[j] + mstep]))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(GlueResult {
        z: orbit[0],
        transitions,
        tau_bound: scales.tau,
        shadow_errors,
        offsets,
        pseudo_orbit_error: pseudo,
        orbit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseMapConfig;

    #[test]
    fn doubling_base_transition() {
        let g = BaseMap::new(BaseMapConfig::linear(&[2])).unwrap();
        let tau = base_transition_time(&g, 0.05).unwrap();
        assert!(tau <= 6, "{tau}");
    }

    #[test]
    fn single_segment_is_its_own_orbit() {
        let g = BaseMap::new(BaseMapConfig::linear(&[2])).unwrap();
        let f = SkewProduct::new(g, None, None).unwrap();
        let s = f.attractor_sample(60, 1, 2);
        let seg = OrbitSegment {
            start: s.points[0],
            itinerary: vec![false; 5],
        };
        let scales = GlueScales::new(&f, 1.5, 0.05).unwrap();
        let r = specification_glue(&f, &[seg], &scales).unwrap();
        assert_eq!(r.z, s.points[0]);
        assert!(r.transitions.is_empty());
        assert_eq!(r.max_shadow_error(), 0.0);
    }
}
