//! Disk-fiber skew products over a base map and their attractors.
//!
//! `f(t, z)_i = (g(t)_i, lambda_s z_i + s e^{2 pi i t_i})` on `T^m x (D^2)^m`.
//! The attractor is the closure of the forward images; every point on it is
//! coded by its backward base itinerary, and the fiber coordinate is the
//! geometric series `sum_j lambda_s^{j-1} s e^{2 pi i t_{-j}}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::{BaseMap, ExpansionProfile};
use crate::error::{Error, Result};
use crate::report::{CheckEntry, HypothesisReport};
use crate::rng::{stream, stream_rng, Rng};
use crate::torus::{TorusPoint, MAX_DIM};

/// Default fiber rotation coefficient `s`.
pub const DEFAULT_FIBER_SCALE: f64 = 0.5;
/// Upper limit for the holonomy replay depth.
pub const MAX_HOLONOMY_DEPTH: usize = 60;
/// Size of the random perturbation added to forward base orbits.
pub const DITHER: f64 = 1.0 / (1u64 << 50) as f64;
/// Work unit for parallel sampling; fixed so results ignore the thread count.
pub const SAMPLE_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolenoidPoint {
    pub base: TorusPoint,
    #[serde(serialize_with = "ser_fiber")]
    fiber: [Complex64; MAX_DIM],
}

fn ser_fiber<S: serde::Serializer>(f: &[Complex64; MAX_DIM], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2 * MAX_DIM))?;
    for z in f {
        seq.serialize_element(&z.re)?;
        seq.serialize_element(&z.im)?;
    }
    seq.end()
}

impl SolenoidPoint {
    pub fn new(base: TorusPoint, fiber: &[Complex64]) -> Self {
        assert_eq!(base.dim(), fiber.len(), "one fiber coordinate per base coordinate");
        let mut f = [Complex64::new(0.0, 0.0); MAX_DIM];
        f[..fiber.len()].copy_from_slice(fiber);
        SolenoidPoint { base, fiber: f }
    }

    /// Point with all fiber coordinates at the disk centre.
    pub fn on_zero_section(base: TorusPoint) -> Self {
        SolenoidPoint {
            base,
            fiber: [Complex64::new(0.0, 0.0); MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber(&self) -> &[Complex64] {
        &self.fiber[..self.base.dim()]
    }

    pub fn fiber_mut(&mut self) -> &mut [Complex64] {
        let m = self.base.dim();
        &mut self.fiber[..m]
    }

    /// `pi(p)`.
    pub fn project(&self) -> TorusPoint {
        self.base
    }

    /// Product max metric `d_M`.
    pub fn dist(&self, other: &SolenoidPoint) -> f64 {
        self.fiber()
            .iter()
            .zip(other.fiber())
            .map(|(a, b)| (a - b).norm())
            .fold(self.base.dist(&other.base), f64::max)
    }
}

/// `d_M(p1, p2)`.
pub fn metric_m(p1: &SolenoidPoint, p2: &SolenoidPoint) -> f64 {
    p1.dist(p2)
}

#[inline]
pub(crate) fn cis(t: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

#[derive(Clone, Debug)]
pub struct SkewProduct {
    g: BaseMap,
    lambda_s: f64,
    scale: f64,
    overridden: bool,
}

impl SkewProduct {
    /// Builds `f` over `g`. `lambda_s` defaults to `2^{-deg g}`, `scale` to 1/2.
    pub fn new(g: BaseMap, lambda_override: Option<f64>, scale: Option<f64>) -> Result<Self> {
        let lambda_s = lambda_override.unwrap_or_else(|| 0.5f64.powi(g.deg() as i32));
        let scale = scale.unwrap_or(DEFAULT_FIBER_SCALE);
        if !(lambda_s > 0.0 && lambda_s < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fiber contraction {lambda_s} outside (0,1)"
            )));
        }
        if !(scale > 0.0 && lambda_s + scale <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fiber scale {scale} must be positive with lambda_s + scale <= 1 so the disk maps into itself"
            )));
        }
        Ok(SkewProduct {
            g,
            lambda_s,
            scale,
            overridden: lambda_override.is_some(),
        })
    }

    pub fn base(&self) -> &BaseMap {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn fiber_scale(&self) -> f64 {
        self.scale
    }

    pub fn lambda_overridden(&self) -> bool {
        self.overridden
    }

    /// Radius of the disk containing every attractor fiber coordinate.
    pub fn attractor_radius(&self) -> f64 {
        self.scale / (1.0 - self.lambda_s)
    }

    /// Replay depth `n_h`: enough for `lambda_s^{n_h} <= 1e-12`. Going deeper
    /// is pointless: each backward step divides the fiber by `lambda_s`, so
    /// rounding and dither noise grow like `lambda_s^{-j}`.
    pub fn holonomy_depth(&self) -> usize {
        let n = (1e-12f64.ln() / self.lambda_s.ln()).ceil() as usize;
        n.clamp(1, MAX_HOLONOMY_DEPTH)
    }

    /// `f(p)`.
    pub fn eval(&self, p: &SolenoidPoint) -> SolenoidPoint {
        let mut q = SolenoidPoint::on_zero_section(self.g.eval(&p.base));
        for i in 0..self.dim() {
            q.fiber[i] = self.lambda_s * p.fiber[i] + self.scale * cis(p.base.get(i));
        }
        q
    }

    /// `f(p)` with the base coordinate perturbed by at most [`DITHER`].
    ///
    /// Floating point iteration of `x -> k x mod 1` loses `log2 k` bits per
    /// step and collapses onto 0 after about 52 steps; the dither keeps long
    /// orbits generic.
    pub fn eval_dithered(&self, p: &SolenoidPoint, rng: &mut Rng) -> SolenoidPoint {
        let mut q = self.eval(p);
        let mut d = [0.0; MAX_DIM];
        for v in d.iter_mut().take(self.dim()) {
            *v = rng.gen_range(-DITHER..DITHER);
        }
        q.base = q.base.offset(&d[..self.dim()]);
        q
    }

    /// Full Jacobian of `f` in real coordinates `(t, Re z_1, Im z_1, ...)`.
    pub fn jacobian(&self, p: &SolenoidPoint) -> DMatrix<f64> {
        let m = self.dim();
        let n = 3 * m;
        let mut j = DMatrix::zeros(n, n);
        let jg = self.g.jacobian(&p.base);
        for r in 0..m {
            for c in 0..m {
                j[(r, c)] = jg[r][c];
            }
        }
        for i in 0..m {
            let (s, c) = (2.0 * PI * p.base.get(i)).sin_cos();
            let (re, im) = (m + 2 * i, m + 2 * i + 1);
            j[(re, i)] = -2.0 * PI * self.scale * s;
            j[(im, i)] = 2.0 * PI * self.scale * c;
            j[(re, re)] = self.lambda_s;
            j[(im, im)] = self.lambda_s;
        }
        j
    }

    /// Random start in `M`, uniform in base and fiber disks.
    pub fn random_point(&self, rng: &mut Rng) -> SolenoidPoint {
        let m = self.dim();
        let c: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let mut p = SolenoidPoint::on_zero_section(TorusPoint::new(&c));
        for z in p.fiber_mut() {
            let r = rng.gen::<f64>().sqrt();
            *z = r * cis(rng.gen::<f64>());
        }
        p
    }

    /// One backward step: the preimage branch whose fiber contribution
    /// explains `p`, and the reconstructed preimage point.
    ///
    /// `noise` bounds the absolute error already present in `p`'s fiber.
    pub fn backward_step(&self, p: &SolenoidPoint, noise: f64) -> Result<(usize, SolenoidPoint)> {
        let m = self.dim();
        let pre = self.g.inverse_branches(&p.base)?;
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        for (b, x) in pre.iter().enumerate() {
            let res = (0..m)
                .map(|i| (p.fiber[i] - self.scale * cis(x.get(i))).norm())
                .fold(0.0, f64::max);
            if res < best.1 {
                second = best.1;
                best = (b, res);
            } else if res < second {
                second = res;
            }
        }
        let thresh = self.lambda_s * (self.attractor_radius() + 1e-9) + noise;
        if !(best.1 <= thresh && second > thresh) {
            return Err(Error::InsufficientBurnIn {
                depth: 0,
            });
        }
        let x = pre[best.0];
        let mut q = SolenoidPoint::on_zero_section(x);
        for i in 0..m {
            q.fiber[i] = (p.fiber[i] - self.scale * cis(x.get(i))) / self.lambda_s;
        }
        Ok((best.0, q))
    }

    /// Backward history of `p` to depth `depth`, read off its fiber.
    pub fn recover_history(&self, p: &SolenoidPoint, depth: usize) -> Result<BackwardHistory> {
        let mut cur = *p;
        let mut labels = Vec::with_capacity(depth);
        let mut bases = Vec::with_capacity(depth);
        // Covers rounding plus the base dither of sampled orbits.
        let eps = 1e-13;
        for j in 0..depth {
            let noise = eps * self.lambda_s.powi(-(j as i32));
            match self.backward_step(&cur, noise) {
                Ok((b, q)) => {
                    labels.push(b);
                    bases.push(q.base);
                    cur = q;
                }
                Err(_) => return Err(Error::InsufficientBurnIn { depth: j }),
            }
        }
        Ok(BackwardHistory {
            labels,
            bases,
            tail: cur,
        })
    }

    /// Backward itinerary of `p` (branch indices, most recent first) together
    /// with the point reconstructed at depth `depth`.
    pub fn recover_itinerary(&self, p: &SolenoidPoint, depth: usize) -> Result<(Vec<usize>, SolenoidPoint)> {
        let h = self.recover_history(p, depth)?;
        Ok((h.labels, h.tail))
    }

    /// Fiber-preserving holonomy `h_{x_hat, y_hat}` applied to `p` over `x_hat`.
    ///
    /// The backward orbit of `y_hat` shadows that of `x_hat`: at every step
    /// the preimage nearest to `x_hat`'s is taken. For nearby base points this
    /// is the local stable continuation; branch labels alone would jump
    /// across the seams of the branch domains.
    pub fn holonomy(&self, x_hat: &TorusPoint, y_hat: &TorusPoint, p: &SolenoidPoint) -> Result<SolenoidPoint> {
        if p.base.dist(x_hat) > 1e-12 {
            return Err(Error::InvalidArgument("p does not lie over x_hat".into()));
        }
        let h = self.recover_history(p, self.holonomy_depth())?;
        self.replay_along(y_hat, &h)
    }

    /// Fiber over `y_hat` whose past shadows `history`.
    pub fn replay_along(&self, y_hat: &TorusPoint, history: &BackwardHistory) -> Result<SolenoidPoint> {
        let mut orbit = Vec::with_capacity(history.bases.len());
        let mut y = *y_hat;
        for x in &history.bases {
            y = self.g.closest_preimage(&y, x)?.1;
            orbit.push(y);
        }
        Ok(self.close_series(y_hat, &orbit, history.tail.fiber()))
    }

    /// Fiber over `y_hat` for backward itinerary `labels`, closing the series
    /// with `tail` (the fiber at depth `labels.len()`).
    pub fn replay(&self, y_hat: &TorusPoint, labels: &[usize], tail: &[Complex64]) -> Result<SolenoidPoint> {
        let mut orbit = Vec::with_capacity(labels.len());
        let mut y = *y_hat;
        for &b in labels {
            y = self.g.preimage(&y, b)?;
            orbit.push(y);
        }
        Ok(self.close_series(y_hat, &orbit, tail))
    }

    fn close_series(&self, y_hat: &TorusPoint, past: &[TorusPoint], tail: &[Complex64]) -> SolenoidPoint {
        let m = self.dim();
        let mut z = [Complex64::new(0.0, 0.0); MAX_DIM];
        z[..m].copy_from_slice(tail);
        for y in past.iter().rev() {
            for i in 0..m {
                z[i] = self.lambda_s * z[i] + self.scale * cis(y.get(i));
            }
        }
        SolenoidPoint::new(*y_hat, &z[..m])
    }

    /// Iterates `burn_in` dithered steps from `count` random starts.
    pub fn attractor_sample(&self, burn_in: usize, count: usize, seed: u64) -> AttractorSample {
        let chunks = count.div_ceil(SAMPLE_CHUNK);
        let points: Vec<SolenoidPoint> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = stream_rng(seed, stream::ATTRACTOR, c as u64);
                let len = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
                (0..len)
                    .map(|_| {
                        let mut p = self.random_point(&mut rng);
                        for _ in 0..burn_in {
                            p = self.eval_dithered(&p, &mut rng);
                        }
                        p
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        AttractorSample {
            points,
            burn_in,
            seed,
        }
    }

    /// A dithered forward orbit of length `len` starting at `p`.
    pub fn orbit(&self, p: &SolenoidPoint, len: usize, rng: &mut Rng) -> Vec<SolenoidPoint> {
        let mut out = Vec::with_capacity(len);
        let mut cur = *p;
        for _ in 0..len {
            out.push(cur);
            cur = self.eval_dithered(&cur, rng);
        }
        out
    }
}

/// Past of an attractor point: branch labels and base points, most recent
/// first, and the reconstructed point at the deepest level.
#[derive(Clone, Debug)]
pub struct BackwardHistory {
    pub labels: Vec<usize>,
    pub bases: Vec<TorusPoint>,
    pub tail: SolenoidPoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractorSample {
    pub points: Vec<SolenoidPoint>,
    pub burn_in: usize,
    pub seed: u64,
}

impl AttractorSample {
    /// CSV with columns `base_0.., re_fiber_0, im_fiber_0, ..`.
    pub fn to_csv(&self) -> String {
        let m = self.points.first().map_or(1, |p| p.dim());
        let mut out = String::from("# schema_version=1\n");
        let mut cols: Vec<String> = (0..m).map(|i| format!("base_{i}")).collect();
        for i in 0..m {
            cols.push(format!("re_fiber_{i}"));
            cols.push(format!("im_fiber_{i}"));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
        for p in &self.points {
            let mut row: Vec<String> = p.base.coords().iter().map(|v| format!("{v:.17e}")).collect();
            for z in p.fiber() {
                row.push(format!("{:.17e}", z.re));
                row.push(format!("{:.17e}", z.im));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Measured constant of the local product structure:
/// `(1/C) S <= d_M(p1, p2) <= C S` with `S = d_N + |fiber(h(p1)) - fiber(p2)|`,
/// over pairs with base distance at most `radius`.
///
/// Pairs alternate between a shared past (pure holonomy direction) and an
/// unrelated past replayed over a nearby base point.
pub fn measure_holonomy_constant(
    f: &SkewProduct,
    sample: &AttractorSample,
    pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    let pts = &sample.points;
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sample points".into()));
    }
    let mut rng = stream_rng(seed, stream::HOLONOMY, 0);
    let mut c = 1.0f64;
    for k in 0..pairs {
        let a = pts[rng.gen_range(0..pts.len())];
        let mut d = [0.0; MAX_DIM];
        for v in d.iter_mut().take(f.dim()) {
            *v = rng.gen_range(-radius..radius);
        }
        let y = a.base.offset(&d[..f.dim()]);
        let ha = f.recover_history(&a, f.holonomy_depth())?;
        let b = if k % 2 == 0 {
            f.replay_along(&y, &ha)?
        } else {
            let other = f.recover_history(&pts[rng.gen_range(0..pts.len())], f.holonomy_depth())?;
            f.replay_along(&y, &other)?
        };
        let dm = a.dist(&b);
        if dm == 0.0 {
            continue;
        }
        let h = f.replay_along(&b.base, &ha)?;
        let fib = h
            .fiber()
            .iter()
            .zip(b.fiber())
            .map(|(u, v)| (u - v).norm())
            .fold(0.0, f64::max);
        let s = a.base.dist(&b.base) + fib;
        c = c.max(dm / s).max(s / dm);
    }
    Ok(c)
}

/// Geometric-mean contraction of the graph transform on the centre-unstable
/// cone along a forward orbit: `W' = (B + lambda_s W) Dg^{-1}`.
pub fn cone_contraction(f: &SkewProduct, start: &SolenoidPoint, steps: usize, seed: u64) -> f64 {
    let m = f.dim();
    let mut rng = stream_rng(seed, stream::CONTRACTION, 0);
    // Two graphs differ by D, and D' = lambda_s D Dg^{-1}; tracking D directly
    // (renormalized) avoids cancellation once the graphs agree to rounding.
    let mut d = DMatrix::<f64>::from_fn(2 * m, m, |_, _| rng.gen_range(-1.0..1.0));
    let mut p = *start;
    let mut log_sum = 0.0;
    let mut used = 0;
    for _ in 0..steps {
        let dg = f.jacobian(&p).view((0, 0), (m, m)).into_owned();
        let inv = dg.try_inverse().expect("local diffeomorphism");
        let before = d.abs().max();
        d = f.lambda_s() * &d * &inv;
        let after = d.abs().max();
        if before > 0.0 && after > 0.0 {
            log_sum += (after / before).ln();
            used += 1;
            d /= after;
        }
        p = f.eval_dithered(&p, &mut rng);
    }
    if used == 0 {
        0.0
    } else {
        (log_sum / used as f64).exp()
    }
}

/// Numerical checks of the fiber hypotheses. Also returns the measured `C`.
pub fn verify_skew_hypotheses(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    sample: &AttractorSample,
    seed: u64,
) -> Result<(HypothesisReport, f64)> {
    let mut rep = HypothesisReport::default();
    let ls = f.lambda_s();
    rep.push(CheckEntry::strict_upper("H3_lambda_s_lt_1", ls, 1.0));

    let mut rng = stream_rng(seed, stream::HYPOTHESES, 1);
    let (mut contraction, mut semi) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let p = f.random_point(&mut rng);
        let mut q = f.random_point(&mut rng);
        q.base = p.base;
        let d0 = p.dist(&q);
        if d0 > 0.0 {
            contraction = contraction.max(f.eval(&p).dist(&f.eval(&q)) / d0);
        }
        semi = semi.max(f.eval(&p).base.dist(&f.base().eval(&p.base)));
    }
    rep.push(CheckEntry::upper("H3_fiber_contraction", contraction, ls * (1.0 + 1e-12)));
    rep.push(CheckEntry::upper("semiconjugacy", semi, 1e-12));

    let c = measure_holonomy_constant(f, sample, 10_000, profile.rho, seed)?;
    rep.push(
        CheckEntry::upper("H4_holonomy_constant", c, 2.0)
            .advisory()
            .with_note("measured C; bound is the reference value"),
    );

    let mut inv_err = 0.0f64;
    let depth = f.holonomy_depth();
    for k in 0..200 {
        let p = sample.points[k % sample.points.len()];
        let mut d = [0.0; MAX_DIM];
        for v in d.iter_mut().take(f.dim()) {
            *v = rng.gen_range(-1e-4..1e-4);
        }
        let y = p.base.offset(&d[..f.dim()]);
        if f.base().branch_of(&y) != f.base().branch_of(&p.base) {
            continue;
        }
        let lhs = f.eval(&f.holonomy(&p.base, &y, &p)?);
        let fp = f.eval(&p);
        let rhs = f.holonomy(&fp.base, &f.base().eval(&y), &fp)?;
        inv_err = inv_err.max(lhs.dist(&rhs));
    }
    rep.push(CheckEntry::upper(
        "H4_holonomy_invariance",
        inv_err,
        2.0 * ls.powi(depth as i32) + 1e-12,
    ));

    match profile.l_global {
        Some(l) => rep.push(
            CheckEntry::lower("H5_lambda_s_gt_inv_L", ls, 1.0 / l)
                .advisory()
                .with_note("raising lambda_s above 1/L breaks injectivity of this fiber family"),
        ),
        None => rep.push(CheckEntry::lower("H5_lambda_s_gt_inv_L", ls, 0.0).with_note("Omega empty")),
    }
    let start = sample.points[0];
    let ratio = cone_contraction(f, &start, 40, seed);
    rep.push(CheckEntry::strict_upper("H5_cone_contraction", ratio, 1.0));
    Ok((rep, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseMapConfig;

    fn doubling() -> SkewProduct {
        SkewProduct::new(BaseMap::new(BaseMapConfig::linear(&[2])).unwrap(), None, None).unwrap()
    }

    fn pt(t: f64, z: f64) -> SolenoidPoint {
        SolenoidPoint::new(TorusPoint::new(&[t]), &[Complex64::new(z, 0.0)])
    }

    #[test]
    fn eval_examples() {
        let f = doubling();
        assert_eq!(f.lambda_s(), 0.25);
        let q = f.eval(&pt(0.0, 0.0));
        assert_eq!((q.base.get(0), q.fiber()[0].re), (0.0, 0.5));
        let q = f.eval(&pt(0.5, 0.0));
        assert_eq!(q.base.get(0), 0.0);
        assert!((q.fiber()[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        let q = f.eval(&f.eval(&pt(0.0, 0.0)));
        assert_eq!(q.fiber()[0].re, 0.625);
    }

    #[test]
    fn metric_examples() {
        let p = pt(0.0, 0.0);
        assert_eq!(metric_m(&p, &p), 0.0);
        assert_eq!(metric_m(&p, &pt(0.5, 0.0)), 0.5);
    }

    #[test]
    fn holonomy_replays_geometric_series() {
        let f = doubling();
        let p = pt(0.0, 2.0 / 3.0);
        let y = TorusPoint::new(&[0.5]);
        let h = f.holonomy(&p.base, &y, &p).unwrap();
        let n = f.holonomy_depth();
        let mut expect = Complex64::new(0.0, 0.0);
        for j in 1..=n {
            expect += 0.5 * 0.25f64.powi(j as i32 - 1) * cis(0.5 / 2f64.powi(j as i32));
        }
        expect += 0.25f64.powi(n as i32) * (2.0 / 3.0);
        assert!((h.fiber()[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn holonomy_identity() {
        let f = doubling();
        let s = f.attractor_sample(60, 32, 3);
        for p in &s.points {
            let h = f.holonomy(&p.base, &p.base, p).unwrap();
            assert!(h.dist(p) <= 0.25f64.powi(f.holonomy_depth() as i32) + 1e-12);
        }
    }

    #[test]
    fn off_attractor_is_rejected() {
        let f = doubling();
        assert!(matches!(
            f.holonomy(&TorusPoint::new(&[0.1]), &TorusPoint::new(&[0.2]), &pt(0.1, 0.99)),
            Err(Error::InsufficientBurnIn { .. })
        ));
    }

    #[test]
    fn sample_is_deterministic() {
        let f = doubling();
        let a = f.attractor_sample(40, 600, 11);
        let b = f.attractor_sample(40, 600, 11);
        assert_eq!(a.points, b.points);
        assert!(a.points.iter().all(|p| p.fiber()[0].norm() <= f.attractor_radius() + 1e-12));
    }

    #[test]
    fn cone_rate_for_doubling() {
        let f = doubling();
        let r = cone_contraction(&f, &pt(0.1234, 0.0), 40, 5);
        assert!((r - 0.125).abs() < 1e-9, "{r}");
    }
}
