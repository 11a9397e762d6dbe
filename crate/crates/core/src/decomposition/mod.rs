//! Orbit-segment calculus: Birkhoff fractions of the `Omega_rho` indicator,
//! the good/bad collections, maximal-prefix decomposition and the constants
//! that control contraction along good segments.

mod glue;
mod scans;

pub use glue::{base_transition_time, specification_glue, GlueResult, GlueScales};
pub use scans::{contraction_bound_check, nonexpansive_scan, ContractionReport, NonexpansiveReport};
pub(crate) use scans::bowen_companion;

use rand::Rng as _;
use serde::Serialize;

use crate::base::ExpansionProfile;
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::solenoid::{SkewProduct, SolenoidPoint};

/// A point with its cached `Omega_rho` itinerary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitSegment {
    pub start: SolenoidPoint,
    pub itinerary: Vec<bool>,
}

impl OrbitSegment {
    /// Computes the first `n` indicator bits along the exact forward orbit.
    pub fn new(f: &SkewProduct, profile: &ExpansionProfile, start: SolenoidPoint, n: usize) -> Self {
        let mut bits = Vec::with_capacity(n);
        let mut p = start;
        for _ in 0..n {
            bits.push(profile.in_omega_rho(&p.base));
            p = f.eval(&p);
        }
        OrbitSegment {
            start,
            itinerary: bits,
        }
    }

    pub fn len(&self) -> usize {
        self.itinerary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.itinerary.is_empty()
    }

    /// Points `x, f x, ..., f^n x` (inclusive of the endpoint).
    pub fn orbit(&self, f: &SkewProduct) -> Vec<SolenoidPoint> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut p = self.start;
        out.push(p);
        for _ in 0..self.len() {
            p = f.eval(&p);
            out.push(p);
        }
        out
    }
}

/// `beta(x, n)`: fraction of set bits. Undefined for the empty segment.
pub fn birkhoff_fraction(bits: &[bool]) -> Result<f64> {
    if bits.is_empty() {
        return Err(Error::EmptySegment);
    }
    Ok(bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub in_s: bool,
    pub in_g: bool,
}

/// Slack for comparing integer counts with `alpha * n`, so that exact ties
/// such as `0.7 * 10` are not lost to rounding.
const TIE_TOL: f64 = 1e-9;

/// Good iff every suffix has average `< alpha`.
pub fn is_good(bits: &[bool], alpha: f64) -> bool {
    let mut ones = 0usize;
    for (j, &b) in bits.iter().rev().enumerate() {
        ones += b as usize;
        if ones as f64 >= alpha * (j + 1) as f64 - TIE_TOL {
            return false;
        }
    }
    true
}

/// Bad iff `beta >= alpha` (ties go here).
pub fn is_bad(bits: &[bool], alpha: f64) -> bool {
    let ones = bits.iter().filter(|&&b| b).count();
    !bits.is_empty() && ones as f64 >= alpha * bits.len() as f64 - TIE_TOL
}

pub fn classify_bits(bits: &[bool], alpha: f64) -> Classification {
    Classification {
        in_s: is_bad(bits, alpha),
        in_g: is_good(bits, alpha),
    }
}

/// Largest `s` with the length-`s` prefix good. The remainder is bad or empty.
pub fn decompose_bits(bits: &[bool], alpha: f64) -> usize {
    (0..=bits.len())
        .rev()
        .find(|&s| is_good(&bits[..s], alpha))
        .unwrap_or(0)
}

/// `ln(lambda_u) / (ln(lambda_u) - ln L)`: the largest admissible `alpha`.
pub fn eq1_alpha_bound(l_global: f64, lambda_u: f64) -> f64 {
    lambda_u.ln() / (lambda_u.ln() - l_global.ln())
}

/// `theta_alpha = L^alpha * lambda_u^(1-alpha)`, required to be `< 1`.
pub fn theta_alpha(l_global: f64, lambda_u: f64, alpha: f64) -> Result<f64> {
    if !(l_global > 1.0 && lambda_u > 0.0 && lambda_u < 1.0 && (0.0..1.0).contains(&alpha)) {
        return Err(Error::InvalidArgument(
            "theta_alpha needs L > 1, lambda_u in (0,1), alpha in [0,1)".into(),
        ));
    }
    let bound = eq1_alpha_bound(l_global, lambda_u);
    let theta = (alpha * l_global.ln() + (1.0 - alpha) * lambda_u.ln()).exp();
    if alpha >= bound || theta >= 1.0 {
        return Err(Error::ThetaTooLarge { alpha, bound });
    }
    Ok(theta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionParams {
    pub alpha: f64,
    pub rho: f64,
    pub theta: f64,
    pub l_global: Option<f64>,
    pub lambda_u: f64,
    pub lambda_s: f64,
}

impl DecompositionParams {
    /// With `Omega` empty every inverse branch contracts by `lambda_u` and
    /// `theta = lambda_u`.
    pub fn new(profile: &ExpansionProfile, lambda_s: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0,1)".into()));
        }
        let theta = match profile.l_global {
            Some(l) => theta_alpha(l, profile.lambda_u, alpha)?,
            None => profile.lambda_u,
        };
        Ok(DecompositionParams {
            alpha,
            rho: profile.rho,
            theta,
            l_global: profile.l_global,
            lambda_u: profile.lambda_u,
            lambda_s,
        })
    }
}

/// Result of a decomposition: the good prefix length; the rest is bad.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub s: usize,
    pub prefix: OrbitSegment,
    pub suffix: OrbitSegment,
}

pub fn decompose(f: &SkewProduct, seg: &OrbitSegment, params: &DecompositionParams) -> Decomposition {
    let s = decompose_bits(&seg.itinerary, params.alpha);
    let mut mid = seg.start;
    for _ in 0..s {
        mid = f.eval(&mid);
    }
    Decomposition {
        s,
        prefix: OrbitSegment {
            start: seg.start,
            itinerary: seg.itinerary[..s].to_vec(),
        },
        suffix: OrbitSegment {
            start: mid,
            itinerary: seg.itinerary[s..].to_vec(),
        },
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConcatenationReport {
    pub checked: usize,
    pub counterexamples: Vec<String>,
    /// Decompositions whose prefix was not good, suffix not bad, or `s` not maximal.
    pub decomposition_failures: Vec<String>,
}

impl ConcatenationReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty() && self.decomposition_failures.is_empty()
    }

    fn absorb(&mut self, bits: &[bool], alpha: f64) {
        let word: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        for cut in 0..=bits.len() {
            let (a, b) = bits.split_at(cut);
            self.checked += 1;
            if is_good(a, alpha) && is_good(b, alpha) && !is_good(bits, alpha) {
                self.counterexamples.push(format!("{}|{}", &word[..cut], &word[cut..]));
            }
        }
        let s = decompose_bits(bits, alpha);
        let rest = &bits[s..];
        let maximal = (s + 1..=bits.len()).all(|t| !is_good(&bits[..t], alpha));
        if !is_good(&bits[..s], alpha) || !(rest.is_empty() || is_bad(rest, alpha)) || !maximal {
            self.decomposition_failures.push(format!("{word} s={s}"));
        }
    }
}

/// Exhaustive check over every itinerary of length `<= max_len`.
pub fn check_concatenation_exhaustive(max_len: usize, alpha: f64) -> ConcatenationReport {
    let mut rep = ConcatenationReport::default();
    let mut bits = Vec::with_capacity(max_len);
    for n in 0..=max_len {
        for code in 0u64..(1u64 << n) {
            bits.clear();
            bits.extend((0..n).map(|i| code >> (n - 1 - i) & 1 == 1));
            rep.absorb(&bits, alpha);
        }
    }
    rep
}

/// Random itineraries of length `<= max_len`, every interior cut checked.
pub fn check_concatenation(num_samples: usize, max_len: usize, alpha: f64, seed: u64) -> ConcatenationReport {
    let mut rng = stream_rng(seed, stream::CLASSIFY, 0);
    let mut rep = ConcatenationReport::default();
    for _ in 0..num_samples {
        let n = rng.gen_range(0..=max_len);
        // Bias towards sparse words so good segments actually occur.
        let p = rng.gen_range(0.0..1.0f64).powi(2);
        let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        rep.absorb(&bits, alpha);
    }
    rep
}

/// Samples good segments of length in `[1, max_len]` from attractor points.
pub fn sample_good_segments(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    params: &DecompositionParams,
    starts: &[SolenoidPoint],
    count: usize,
    max_len: usize,
    seed: u64,
) -> Vec<OrbitSegment> {
    let mut rng = stream_rng(seed, stream::CLASSIFY, 1);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let x = starts[rng.gen_range(0..starts.len())];
        let n = rng.gen_range(1..=max_len);
        let seg = OrbitSegment::new(f, profile, x, n);
        if is_good(&seg.itinerary, params.alpha) {
            out.push(seg);
        }
    }
    out
}

/// CSV rows `start coords, n, beta, in_G, in_S, s` for a `dim`-torus base.
pub fn segments_csv(segs: &[OrbitSegment], dim: usize, alpha: f64) -> String {
    let mut out = String::from("# schema_version=1\n");
    let m = dim;
    let mut cols: Vec<String> = (0..m).map(|i| format!("base_{i}")).collect();
    for i in 0..m {
        cols.push(format!("re_fiber_{i}"));
        cols.push(format!("im_fiber_{i}"));
    }
    cols.extend(["n", "beta", "in_G", "in_S", "s"].map(String::from));
    out.push_str(&cols.join(","));
    out.push('\n');
    for seg in segs {
        let mut row: Vec<String> = seg.start.base.coords().iter().map(|v| format!("{v:.17e}")).collect();
        for z in seg.start.fiber() {
            row.push(format!("{:.17e}", z.re));
            row.push(format!("{:.17e}", z.im));
        }
        let c = classify_bits(&seg.itinerary, alpha);
        let beta = birkhoff_fraction(&seg.itinerary).map_or("nan".to_string(), |b| format!("{b:.17e}"));
        row.push(seg.len().to_string());
        row.push(beta);
        row.push(c.in_g.to_string());
        row.push(c.in_s.to_string());
        row.push(decompose_bits(&seg.itinerary, alpha).to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn beta_examples() {
        assert_eq!(birkhoff_fraction(&bits("0000")).unwrap(), 0.0);
        assert_eq!(birkhoff_fraction(&bits("1111")).unwrap(), 1.0);
        assert_eq!(birkhoff_fraction(&bits("0011")).unwrap(), 0.5);
        assert!(matches!(birkhoff_fraction(&[]), Err(Error::EmptySegment)));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_bits(&bits("0000"), 0.3), Classification { in_s: false, in_g: true });
        assert_eq!(classify_bits(&bits("1111"), 1.0), Classification { in_s: true, in_g: false });
        assert_eq!(classify_bits(&bits("0011"), 0.6), Classification { in_s: false, in_g: false });
        assert!(is_good(&[], 0.5));
        let tie = bits("1111111000");
        assert!(is_bad(&tie, 0.7));
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose_bits(&bits("0000"), 0.6), 4);
        assert_eq!(decompose_bits(&bits("1111"), 0.6), 0);
        assert_eq!(decompose_bits(&bits("0011"), 0.6), 2);
    }

    #[test]
    fn theta_examples() {
        assert!((theta_alpha(1.25, 0.9, 0.3).unwrap() - (0.3 * 1.25f64.ln() + 0.7 * 0.9f64.ln()).exp()).abs() < 1e-15);
        assert!((theta_alpha(1.25, 0.9, 0.3).unwrap() - 0.9932).abs() < 1e-4);
        assert_eq!(theta_alpha(1.25, 0.9, 0.0).unwrap(), 0.9);
        assert!((eq1_alpha_bound(2.0, 0.5) - 0.5).abs() < 1e-15);
        assert!(matches!(theta_alpha(2.0, 0.5, 0.5), Err(Error::ThetaTooLarge { .. })));
    }

    #[test]
    fn concatenation_enumeration() {
        for alpha in [0.5, 0.6, 0.75] {
            let rep = check_concatenation_exhaustive(12, alpha);
            assert!(rep.passed(), "{alpha}: {:?}", rep.counterexamples.first());
        }
        assert!(check_concatenation(10_000, 64, 0.6, 1).passed());
    }
}
