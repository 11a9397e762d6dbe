//! Combinatorial and analytic bounds: `eps(alpha)`, `Psi`, the uniqueness
//! certificate, the variation gap, the Bowen property and cylinder counts.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::potential::{Potential, PotentialBounds};
use crate::base::ExpansionProfile;
use crate::decomposition::{bowen_companion, is_good, DecompositionParams, OrbitSegment};
use crate::error::{Error, Result};
use crate::report::{ser_f64, CheckEntry, HypothesisReport};
use crate::rng::{stream, stream_rng};
use crate::solenoid::{SkewProduct, SolenoidPoint};

/// Binary entropy `-a ln a - (1-a) ln(1-a)` with `H(0) = H(1) = 0`.
pub fn binary_entropy(a: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    term(a) + term(1.0 - a)
}

/// Exponential growth allowance `eps(alpha)` for words of length `n` over
/// `deg` symbols with at least `alpha n` of them among `q` marked symbols:
/// `log q + eps(alpha) >= (1/n) log sum_{k >= alpha n} C(n,k) q^k (deg-q)^(n-k)`.
///
/// Above the typical fraction `q / deg` this is the large-deviation rate
/// `H(alpha) + (1 - alpha) log((deg - q)/q)`; below it the count is not
/// exponentially small and the allowance is the full `log(deg / q)`.
pub fn epsilon_alpha(alpha: f64, deg: usize, q: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1]".into()));
    }
    if q == 0 || q >= deg {
        return Err(Error::InvalidArgument(format!("need 1 <= q < deg, got q = {q}, deg = {deg}")));
    }
    let (d, q) = (deg as f64, q as f64);
    if alpha <= q / d {
        return Ok((d / q).ln());
    }
    Ok(binary_entropy(alpha) + (1.0 - alpha) * ((d - q) / q).ln())
}

fn log_l(profile: &ExpansionProfile) -> f64 {
    profile.l_global.map_or(0.0, f64::ln)
}

/// `log q + eps(alpha) + m log L`, or `-inf` when `q = 0`.
pub fn bad_entropy_bound(profile: &ExpansionProfile, alpha: f64) -> Result<f64> {
    if profile.q == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let q = profile.q as f64;
    Ok(q.ln() + epsilon_alpha(alpha, profile.deg, profile.q)? + profile.dim as f64 * log_l(profile))
}

/// `Psi = alpha sup_{Omega_rho} phi + (1 - alpha) sup phi + log q + eps(alpha) + m log L`.
pub fn psi_bound(profile: &ExpansionProfile, alpha: f64, bounds: &PotentialBounds) -> Result<f64> {
    let tail = bad_entropy_bound(profile, alpha)?;
    if tail == f64::NEG_INFINITY {
        return Ok(tail);
    }
    Ok(alpha * bounds.sup_omega + (1.0 - alpha) * bounds.sup + tail)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessCertificate {
    #[serde(serialize_with = "ser_f64")]
    pub psi: f64,
    #[serde(serialize_with = "ser_f64")]
    pub pressure: f64,
    #[serde(serialize_with = "ser_f64")]
    pub pressure_uncertainty: f64,
    /// Estimated pressure on bad segments, when computed.
    #[serde(serialize_with = "ser_f64")]
    pub pressure_bad: f64,
    /// `P - Psi`.
    #[serde(serialize_with = "ser_f64")]
    pub margin: f64,
    /// `Psi - P(S)`.
    #[serde(serialize_with = "ser_f64")]
    pub margin_bad: f64,
    pub certified: bool,
    pub inconclusive: bool,
}

/// Compares `Psi` with the full pressure and, if available, with the
/// bad-collection pressure. Certified iff `P - Psi` exceeds the estimator
/// uncertainty and the bad pressure does not exceed `Psi`.
pub fn uniqueness_certificate(psi: f64, pressure: f64, uncertainty: f64, pressure_bad: Option<f64>) -> UniquenessCertificate {
    let unc = if uncertainty.is_finite() { uncertainty.abs() } else { 0.0 };
    let margin = pressure - psi;
    let pb = pressure_bad.unwrap_or(f64::NEG_INFINITY);
    let margin_bad = if psi == f64::NEG_INFINITY && pb == f64::NEG_INFINITY {
        0.0
    } else {
        psi - pb
    };
    let certified = margin > unc && margin_bad >= 0.0;
    UniquenessCertificate {
        psi,
        pressure,
        pressure_uncertainty: unc,
        pressure_bad: pb,
        margin,
        margin_bad,
        certified,
        inconclusive: margin > 0.0 && margin <= unc,
    }
}

impl UniquenessCertificate {
    pub fn entries(&self) -> HypothesisReport {
        let mut r = HypothesisReport::default();
        r.push(
            CheckEntry::strict_upper("uniqueness_psi_lt_pressure", self.psi + self.pressure_uncertainty, self.pressure)
                .with_note("Psi plus estimator uncertainty against the estimated pressure"),
        );
        r.push(CheckEntry::upper("uniqueness_bad_pressure_le_psi", self.pressure_bad, self.psi));
        r
    }
}

/// `sup phi - inf phi < log deg - log q - eps(alpha) - m log L`
/// (right side `+inf` when `q = 0`).
pub fn variation_gap(profile: &ExpansionProfile, alpha: f64, bounds: &PotentialBounds) -> Result<CheckEntry> {
    let rhs = if profile.q == 0 {
        f64::INFINITY
    } else {
        (profile.deg as f64).ln() - bad_entropy_bound(profile, alpha)?
    };
    Ok(CheckEntry::strict_upper("variation_gap", bounds.sup - bounds.inf, rhs))
}

/// Closed-form Bowen constant `V = 2^(b+1) C K eta^b / (1 - max(theta, lambda_s)^b)`.
pub fn bowen_constant(c: f64, k: f64, exponent: f64, eta: f64, theta: f64, lambda_s: f64) -> f64 {
    2f64.powf(exponent + 1.0) * c * k * eta.powf(exponent) / (1.0 - theta.max(lambda_s).powf(exponent))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BowenVariationReport {
    pub eta: f64,
    #[serde(serialize_with = "ser_f64")]
    pub v_bound: f64,
    pub ns: Vec<usize>,
    /// Largest observed `|S_n phi(x) - S_n phi(y)|` per `n`.
    pub max_observed: Vec<f64>,
    pub samples: Vec<usize>,
    pub pass: bool,
    /// The value at the largest `n` stays within 1.5 times the earlier maximum.
    pub bounded_in_n: bool,
}

const BOWEN_CHUNK: usize = 32;

/// Samples good segments `(x, n)` for each `n` and `y` in `B_n(x, eta)`, and
/// compares `|S_n phi(x) - S_n phi(y)|` with the closed-form constant `V`.
#[allow(clippy::too_many_arguments)]
pub fn bowen_variation(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    params: &DecompositionParams,
    phi: &Potential,
    c_holonomy: f64,
    eta: f64,
    starts: &[SolenoidPoint],
    ns: &[usize],
    num_samples: usize,
    seed: u64,
) -> Result<BowenVariationReport> {
    if starts.is_empty() || ns.is_empty() {
        return Err(Error::InvalidArgument("need start points and segment lengths".into()));
    }
    let (k, b) = phi.holder_data(f.base());
    let v_bound = bowen_constant(c_holonomy, k, b, eta, params.theta, params.lambda_s);
    let mut max_observed = Vec::with_capacity(ns.len());
    let mut samples = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let chunks = num_samples.div_ceil(BOWEN_CHUNK);
        let parts: Vec<Result<(usize, f64)>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(seed, stream::BOWEN, ((ni as u64) << 32) | c as u64);
                let len = BOWEN_CHUNK.min(num_samples - c * BOWEN_CHUNK);
                let (mut count, mut worst) = (0, 0.0f64);
                for i in 0..len {
                    let mut seg = None;
                    for _ in 0..1000 {
                        let s = OrbitSegment::new(f, profile, starts[rng.gen_range(0..starts.len())], n);
                        if is_good(&s.itinerary, params.alpha) {
                            seg = Some(s);
                            break;
                        }
                    }
                    let Some(seg) = seg else {
                        return Err(Error::InvalidArgument(format!("no good segment of length {n} found")));
                    };
                    let orbit = seg.orbit(f);
                    let Some(traj) = bowen_companion(f, &orbit, c * BOWEN_CHUNK + i, eta, &mut rng)? else {
                        continue;
                    };
                    let diff: f64 = orbit
                        .iter()
                        .zip(&traj)
                        .map(|(x, y)| phi.eval(f, x) - phi.eval(f, y))
                        .sum();
                    count += 1;
                    worst = worst.max(diff.abs());
                }
                Ok((count, worst))
            })
            .collect();
        let (mut count, mut worst) = (0, 0.0f64);
        for p in parts {
            let (c, w) = p?;
            count += c;
            worst = worst.max(w);
        }
        max_observed.push(worst);
        samples.push(count);
    }
    let last = *max_observed.last().expect("nonempty");
    let earlier = max_observed[..max_observed.len() - 1].iter().copied().fold(0.0, f64::max);
    let bounded_in_n = max_observed.len() < 2 || last <= 1.5 * earlier + 1e-12;
    Ok(BowenVariationReport {
        eta,
        v_bound,
        ns: ns.to_vec(),
        pass: max_observed.iter().all(|&o| o <= v_bound),
        max_observed,
        samples,
        bounded_in_n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderCount {
    pub n: usize,
    pub alpha: f64,
    pub count: u64,
    #[serde(serialize_with = "ser_f64")]
    pub bound: f64,
}

impl CylinderCount {
    pub fn holds(&self) -> bool {
        self.count as f64 <= self.bound * (1.0 + 1e-12)
    }
}

/// Largest `deg^n` enumerated.
pub const CYLINDER_LIMIT: u64 = 1 << 24;

/// Enumerates the `deg^n` branch words and counts those whose fraction of
/// marked symbols is at least `alpha`; the bound is `exp((log q + eps(alpha)) n)`.
pub fn cylinder_count(deg: usize, marked: &[usize], n: usize, alpha: f64) -> Result<CylinderCount> {
    let q = marked.len();
    let total = (deg as u64).checked_pow(n as u32).filter(|&t| t <= CYLINDER_LIMIT);
    let Some(total) = total else {
        return Err(Error::TooLarge { n, limit: (CYLINDER_LIMIT as f64).log(deg as f64) as usize });
    };
    let is_marked: Vec<bool> = (0..deg).map(|s| marked.contains(&s)).collect();
    let need = alpha * n as f64 - 1e-9;
    let mut count = 0u64;
    let mut word = vec![0usize; n];
    let mut hits = 0usize;
    for w in 0..total {
        if w > 0 {
            // Odometer increment with incremental marked count.
            for d in word.iter_mut() {
                hits -= is_marked[*d] as usize;
                *d += 1;
                if *d == deg {
                    *d = 0;
                    hits += is_marked[0] as usize;
                } else {
                    hits += is_marked[*d] as usize;
                    break;
                }
            }
        } else {
            hits = word.iter().filter(|&&d| is_marked[d]).count();
        }
        if hits as f64 >= need {
            count += 1;
        }
    }
    let bound = if q == 0 {
        if count == 0 { 0.0 } else { f64::INFINITY }
    } else {
        // Every word qualifies at alpha <= 0; the allowance is then log(deg / q).
        let eps = if alpha <= 0.0 {
            (deg as f64 / q as f64).ln()
        } else {
            epsilon_alpha(alpha, deg, q)?
        };
        ((q as f64).ln() * n as f64 + eps * n as f64).exp()
    };
    Ok(CylinderCount { n, alpha, count, bound })
}
