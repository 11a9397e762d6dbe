//! Non-uniformly expanding base maps of the torus.
//!
//! Two families are supported: the linear expanding map
//! `x_i -> k_i x_i mod 1`, and a pitchfork (DA-type) deformation of it that
//! weakens the expansion at the fixed point `0` along the coordinate with the
//! smallest factor:
//!
//! ```text
//! g(x)_w = k_w x_w - (delta / 2 pi) * B(x) * sin(2 pi x_w)   mod 1
//! ```
//!
//! where `B` is a smooth product bump equal to 1 on `[-r/2, r/2]^m` and 0
//! outside `[-r, r]^m`. All other coordinates stay linear, so the Jacobian
//! has a single non-trivial row and every inverse branch reduces to closed
//! forms plus one monotone scalar root.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::{CheckEntry, HypothesisReport};
use crate::rng::{stream, stream_rng};
use crate::torus::{circle_dist, wrap, wrap_signed, TorusBox, TorusPoint, MAX_DIM};

/// Convergence tolerance for inverse branches.
pub const TOL_ROOT: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Linear,
    Pitchfork,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaseMapConfig {
    pub m: usize,
    pub kind: MapKind,
    pub linear_factors: Vec<u32>,
    pub delta: f64,
    pub pert_radius: f64,
    pub lambda_u: f64,
    pub rho: f64,
}

impl BaseMapConfig {
    pub fn linear(factors: &[u32]) -> Self {
        BaseMapConfig {
            m: factors.len(),
            kind: MapKind::Linear,
            linear_factors: factors.to_vec(),
            delta: 0.0,
            pert_radius: 0.25,
            lambda_u: 0.7,
            rho: 0.05,
        }
    }

    pub fn pitchfork(factors: &[u32], delta: f64, pert_radius: f64) -> Self {
        BaseMapConfig {
            kind: MapKind::Pitchfork,
            delta,
            pert_radius,
            ..Self::linear(factors)
        }
    }

    pub fn with_lambda_u(mut self, lambda_u: f64) -> Self {
        self.lambda_u = lambda_u;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }
}

/// A validated base map `g : T^m -> T^m`.
#[derive(Clone, Debug)]
pub struct BaseMap {
    cfg: BaseMapConfig,
    factors: [u32; MAX_DIM],
    weak: usize,
    deg: usize,
    warnings: Vec<String>,
}

/// Exponent of the transverse profile `((1 + cos 2 pi x) / 2)^p`.
pub const TRANSVERSE_POWER: i32 = 4;

/// Transverse factor and its derivative: 1 at 0, decaying smoothly to 0 at 1/2.
fn transverse(x: f64) -> (f64, f64) {
    let (s, c) = (2.0 * PI * x).sin_cos();
    let h = 0.5 * (1.0 + c);
    let p = TRANSVERSE_POWER;
    (h.powi(p), -(p as f64) * h.powi(p - 1) * PI * s)
}

/// `C^infinity` step: 0 for `t <= 0`, 1 for `t >= 1`. Returns `(s, s')`.
fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    let s = a / (a + b);
    let ds = a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b));
    (s, ds)
}

impl BaseMap {
    pub fn new(cfg: BaseMapConfig) -> Result<Self> {
        let m = cfg.m;
        if !(1..=MAX_DIM).contains(&m) {
            return Err(Error::InvalidMap(format!(
                "dimension m = {m} unsupported (1..=3)"
            )));
        }
        if cfg.linear_factors.len() != m {
            return Err(Error::InvalidMap(format!(
                "expected {m} linear factors, got {}",
                cfg.linear_factors.len()
            )));
        }
        if cfg.linear_factors.iter().any(|&k| k < 2) {
            return Err(Error::InvalidMap("linear factors must be >= 2".into()));
        }
        if !(cfg.lambda_u > 0.0 && cfg.lambda_u < 1.0) {
            return Err(Error::InvalidMap("lambda_u must lie in (0, 1)".into()));
        }
        if !(cfg.rho > 0.0) {
            return Err(Error::InvalidMap("rho must be positive".into()));
        }
        let mut factors = [1u32; MAX_DIM];
        factors[..m].copy_from_slice(&cfg.linear_factors);
        let weak = (0..m).min_by_key(|&i| factors[i]).unwrap_or(0);
        let deg = cfg.linear_factors.iter().map(|&k| k as usize).product();
        let mut warnings = Vec::new();
        let mut sorted = cfg.linear_factors.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != m {
            warnings.push("linear factors are not distinct".to_string());
        }
        match cfg.kind {
            MapKind::Linear => {
                if cfg.delta != 0.0 {
                    return Err(Error::InvalidMap("linear map requires delta = 0".into()));
                }
            }
            MapKind::Pitchfork => {
                if !(cfg.delta >= 0.0) {
                    return Err(Error::InvalidMap("delta must be >= 0".into()));
                }
                let kw = factors[weak] as f64;
                if !(cfg.pert_radius > 0.0 && cfg.pert_radius <= 0.5 / kw) {
                    return Err(Error::InvalidMap(format!(
                        "pert_radius must lie in (0, {}] so the perturbation stays inside one branch domain",
                        0.5 / kw
                    )));
                }
            }
        }
        let map = BaseMap {
            cfg,
            factors,
            weak,
            deg,
            warnings,
        };
        if map.is_perturbed() {
            let min_d = map.min_weak_derivative();
            if !(min_d > 0.0) {
                return Err(Error::InvalidMap(format!(
                    "derivative vanishes (min {min_d:.3e}): not a local diffeomorphism"
                )));
            }
        }
        Ok(map)
    }

    pub fn config(&self) -> &BaseMapConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.m
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn factors(&self) -> &[u32] {
        &self.factors[..self.cfg.m]
    }

    /// Index of the perturbed (weakest) coordinate.
    pub fn weak_coordinate(&self) -> usize {
        self.weak
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_perturbed(&self) -> bool {
        self.cfg.kind == MapKind::Pitchfork && self.cfg.delta != 0.0
    }

    fn bump1(&self, x: f64) -> (f64, f64) {
        let r = self.cfg.pert_radius;
        let u = wrap_signed(x);
        let a = u.abs();
        if a <= 0.5 * r {
            return (1.0, 0.0);
        }
        if a >= r {
            return (0.0, 0.0);
        }
        let (s, ds) = smoothstep((a - 0.5 * r) / (0.5 * r));
        (1.0 - s, -ds * (2.0 / r) * u.signum())
    }

    /// Perturbation profile: compact bump in the weak coordinate times a
    /// slowly varying periodic factor in the others. Product bump and its gradient.
    fn bump(&self, x: &[f64]) -> (f64, [f64; MAX_DIM]) {
        let m = self.cfg.m;
        let mut vals = [(0.0, 0.0); MAX_DIM];
        for i in 0..m {
            vals[i] = if i == self.weak {
                self.bump1(x[i])
            } else {
                transverse(x[i])
            };
        }
        let b: f64 = vals[..m].iter().map(|v| v.0).product();
        let mut grad = [0.0; MAX_DIM];
        if b != 0.0 || vals[..m].iter().any(|v| v.1 != 0.0) {
            for i in 0..m {
                let mut g = vals[i].1;
                for (j, v) in vals[..m].iter().enumerate() {
                    if j != i {
                        g *= v.0;
                    }
                }
                grad[i] = g;
            }
        }
        (b, grad)
    }

    /// Lift of the weak coordinate: `G(u) = k u - (delta/2pi) B sin(2 pi u)`.
    fn weak_lift(&self, x: &[f64], u: f64) -> f64 {
        let k = self.factors[self.weak] as f64;
        if !self.is_perturbed() {
            return k * u;
        }
        let mut xs = [0.0; MAX_DIM];
        xs[..self.cfg.m].copy_from_slice(&x[..self.cfg.m]);
        xs[self.weak] = u;
        let (b, _) = self.bump(&xs[..self.cfg.m]);
        k * u - self.cfg.delta / (2.0 * PI) * b * (2.0 * PI * u).sin()
    }

    /// `g(x)`, renormalized to `[0,1)^m`.
    pub fn eval(&self, x: &TorusPoint) -> TorusPoint {
        let m = self.cfg.m;
        let mut out = [0.0; MAX_DIM];
        for i in 0..m {
            out[i] = if i == self.weak {
                self.weak_lift(x.coords(), x.get(i))
            } else {
                self.factors[i] as f64 * x.get(i)
            };
        }
        TorusPoint::new(&out[..m])
    }

    /// Jacobian `Dg(x)` (row-major, `m x m` block of a 3x3 array).
    pub fn jacobian(&self, x: &TorusPoint) -> [[f64; MAX_DIM]; MAX_DIM] {
        let m = self.cfg.m;
        let mut j = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..m {
            j[i][i] = self.factors[i] as f64;
        }
        if self.is_perturbed() {
            let w = self.weak;
            let xw = x.get(w);
            let (b, grad) = self.bump(x.coords());
            let (s, c) = (2.0 * PI * xw).sin_cos();
            let d = self.cfg.delta;
            for i in 0..m {
                if i == w {
                    j[w][w] = self.factors[w] as f64 - d * (b * c + grad[w] * s / (2.0 * PI));
                } else {
                    j[w][i] = -d / (2.0 * PI) * grad[i] * s;
                }
            }
        }
        j
    }

    fn jacobian_matrix(&self, x: &TorusPoint) -> DMatrix<f64> {
        let m = self.cfg.m;
        let j = self.jacobian(x);
        DMatrix::from_fn(m, m, |r, c| j[r][c])
    }

    /// `|det Dg(x)|`; the Jacobian is triangular up to one row, so this is the
    /// product of the diagonal.
    pub fn jacobian_det(&self, x: &TorusPoint) -> f64 {
        let j = self.jacobian(x);
        (0..self.cfg.m).map(|i| j[i][i]).product::<f64>().abs()
    }

    /// `L(x)`: operator norm of `Dg(x)^{-1}` for the max metric.
    pub fn local_lipschitz(&self, x: &TorusPoint) -> f64 {
        let m = self.cfg.m;
        if m == 1 {
            return 1.0 / self.jacobian(x)[0][0].abs();
        }
        let inv = self
            .jacobian_matrix(x)
            .try_inverse()
            .expect("construction guarantees an invertible Jacobian");
        (0..m)
            .map(|r| (0..m).map(|c| inv[(r, c)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Half-width of the coordinate range where the perturbation is active.
    fn support_half_width(&self, i: usize) -> f64 {
        if i == self.weak {
            self.cfg.pert_radius
        } else {
            0.5
        }
    }

    fn min_weak_derivative(&self) -> f64 {
        // The derivative only departs from k_w inside the bump support.
        let m = self.cfg.m;
        let per = match m {
            1 => 20_001,
            2 => 401,
            _ => 61,
        };
        let mut min_d = f64::INFINITY;
        let mut idx = vec![0usize; m];
        loop {
            let c: Vec<f64> = (0..m)
                .map(|i| {
                    let h = self.support_half_width(i);
                    -h + 2.0 * h * idx[i] as f64 / (per - 1) as f64
                })
                .collect();
            let p = TorusPoint::new(&c);
            min_d = min_d.min(self.jacobian(&p)[self.weak][self.weak]);
            if !advance(&mut idx, per) {
                break;
            }
        }
        min_d
    }

    /// Branch labels (one lift offset per coordinate) for a flat branch index.
    pub fn branch_labels(&self, branch: usize) -> [usize; MAX_DIM] {
        let mut labels = [0usize; MAX_DIM];
        let mut rest = branch;
        for i in (0..self.cfg.m).rev() {
            let k = self.factors[i] as usize;
            labels[i] = rest % k;
            rest /= k;
        }
        labels
    }

    fn branch_index(&self, labels: &[usize; MAX_DIM]) -> usize {
        let mut idx = 0;
        for i in 0..self.cfg.m {
            idx = idx * self.factors[i] as usize + labels[i];
        }
        idx
    }

    /// The branch (as a flat index) through which `x` is a preimage of `g(x)`.
    pub fn branch_of(&self, x: &TorusPoint) -> usize {
        let mut labels = [0usize; MAX_DIM];
        for i in 0..self.cfg.m {
            let lift = if i == self.weak {
                self.weak_lift(x.coords(), x.get(i))
            } else {
                self.factors[i] as f64 * x.get(i)
            };
            labels[i] = (lift.floor().max(0.0) as usize).min(self.factors[i] as usize - 1);
        }
        self.branch_index(&labels)
    }

    /// The preimage of `y` on inverse branch `branch`.
    pub fn preimage(&self, y: &TorusPoint, branch: usize) -> Result<TorusPoint> {
        let m = self.cfg.m;
        let labels = self.branch_labels(branch);
        let mut x = [0.0; MAX_DIM];
        for i in 0..m {
            x[i] = (y.get(i) + labels[i] as f64) / self.factors[i] as f64;
        }
        if self.is_perturbed() {
            let w = self.weak;
            let k = self.factors[w] as f64;
            let target = y.get(w) + labels[w] as f64;
            let spread = self.cfg.delta / (2.0 * PI * k) + 1e-12;
            let (mut lo, mut hi) = (target / k - spread, target / k + spread);
            let f = |u: f64| self.weak_lift(&x[..m], u) - target;
            let (flo, fhi) = (f(lo), f(hi));
            if !(flo <= 0.0 && fhi >= 0.0) {
                return Err(Error::RootFinding { branch });
            }
            let mut u = 0.5 * (lo + hi);
            let mut converged = false;
            for _ in 0..ROOT_MAX_ITER {
                let val = f(u);
                if val.abs() <= 1e-15 || hi - lo <= 1e-16 {
                    converged = true;
                    break;
                }
                if val < 0.0 {
                    lo = u;
                } else {
                    hi = u;
                }
                let mut xs = x;
                xs[w] = u;
                let d = self.jacobian(&TorusPoint::new(&xs[..m]))[w][w];
                let newton = u - val / d;
                u = if newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
            }
            if !converged && f(u).abs() > TOL_ROOT {
                return Err(Error::RootFinding { branch });
            }
            x[w] = wrap(u);
        }
        Ok(TorusPoint::new(&x[..m]))
    }

    /// All `deg(g)` preimages of `y`, ordered by branch index.
    pub fn inverse_branches(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>> {
        (0..self.deg).map(|b| self.preimage(y, b)).collect()
    }

    /// The preimage of `y` closest to `near`, with its branch index.
    pub fn closest_preimage(&self, y: &TorusPoint, near: &TorusPoint) -> Result<(usize, TorusPoint)> {
        let mut best: Option<(usize, TorusPoint, f64)> = None;
        for b in 0..self.deg {
            let x = self.preimage(y, b)?;
            let d = x.dist(near);
            if best.as_ref().is_none_or(|(_, _, bd)| d < *bd) {
                best = Some((b, x, d));
            }
        }
        let (b, x, _) = best.expect("deg >= 2");
        Ok((b, x))
    }

    /// Canonical branch partition element containing `x`: the fundamental
    /// domain of the linear model centred at the lattice point nearest `x`.
    pub fn partition_element(&self, x: &TorusPoint) -> usize {
        let mut labels = [0usize; MAX_DIM];
        for i in 0..self.cfg.m {
            let k = self.factors[i] as usize;
            labels[i] = ((x.get(i) * k as f64).round() as usize) % k;
        }
        self.branch_index(&labels)
    }

    /// The partition element with flat index `idx` as a box.
    pub fn partition_box(&self, idx: usize) -> TorusBox {
        let labels = self.branch_labels(idx);
        let m = self.cfg.m;
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for i in 0..m {
            let k = self.factors[i] as f64;
            lo[i] = (labels[i] as f64 - 0.5) / k;
            hi[i] = (labels[i] as f64 + 0.5) / k;
        }
        TorusBox::new(&lo[..m], &hi[..m])
    }
}

/// Odometer increment over `[0, per)^len`; returns false after the last index.
pub(crate) fn advance(idx: &mut [usize], per: usize) -> bool {
    for v in idx.iter_mut().rev() {
        *v += 1;
        if *v < per {
            return true;
        }
        *v = 0;
    }
    false
}

/// (H1)/(H2) data: where inverse branches may expand.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionProfile {
    pub lambda_u: f64,
    pub rho: f64,
    /// Boxes whose union contains `{L(x) >= lambda_u}`.
    pub omega: Vec<TorusBox>,
    /// `omega` enlarged by `rho`.
    pub omega_rho: Vec<TorusBox>,
    /// `sup_Omega L(x)` with a `1 + 1e-6` safety factor; `None` when Omega is empty.
    pub l_global: Option<f64>,
    /// Number of partition elements meeting Omega.
    pub q: usize,
    pub deg: usize,
    pub dim: usize,
    /// Flat indices of the partition elements covering Omega.
    pub covering_elements: Vec<usize>,
}

const PROFILE_GRID_1D: usize = 100_000;

impl ExpansionProfile {
    pub fn build(g: &BaseMap, lambda_u: f64, rho: f64) -> Result<Self> {
        if !(lambda_u > 0.0 && lambda_u < 1.0) {
            return Err(Error::InvalidArgument("lambda_u must lie in (0,1)".into()));
        }
        let m = g.dim();
        let omega = if !g.is_perturbed() {
            let l = g.local_lipschitz(&TorusPoint::origin(m));
            if l >= lambda_u {
                return Err(Error::H2Violation {
                    q: g.deg(),
                    deg: g.deg(),
                });
            }
            Vec::new()
        } else if m == 1 {
            omega_intervals_1d(g, lambda_u)?
        } else {
            omega_box_nd(g, lambda_u)?
        };

        let l_global = if omega.is_empty() {
            None
        } else {
            let mut sup = 0.0f64;
            for b in &omega {
                sup = sup.max(sup_over_box(g, b));
            }
            let lg = sup * (1.0 + 1e-6);
            if lg <= 1.0 {
                return Err(Error::Inconsistent(format!(
                    "Omega is nonempty but sup L = {lg} <= 1"
                )));
            }
            Some(lg)
        };

        let mut covering = std::collections::BTreeSet::new();
        for b in &omega {
            for idx in 0..g.deg() {
                if boxes_overlap(b, &g.partition_box(idx)) {
                    covering.insert(idx);
                }
            }
        }
        let q = covering.len();
        if q >= g.deg() {
            return Err(Error::H2Violation { q, deg: g.deg() });
        }
        Ok(ExpansionProfile {
            lambda_u,
            rho,
            omega_rho: omega.iter().map(|b| b.enlarged(rho)).collect(),
            omega,
            l_global,
            q,
            deg: g.deg(),
            dim: m,
            covering_elements: covering.into_iter().collect(),
        })
    }

    pub fn omega_is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn in_omega(&self, x: &TorusPoint) -> bool {
        self.omega.iter().any(|b| b.contains(x))
    }

    /// `chi_{Omega_rho}(x)`: strictly within `rho` of Omega.
    pub fn in_omega_rho(&self, x: &TorusPoint) -> bool {
        self.omega.iter().any(|b| b.dist(x) < self.rho)
    }

    /// JSON export `{omega_boxes, L_global, lambda_u, q, deg}`.
    pub fn to_json(&self) -> serde_json::Value {
        let boxes: Vec<_> = self
            .omega
            .iter()
            .map(|b| {
                serde_json::json!({
                    "lo": &b.lo[..b.dim],
                    "hi": &b.hi[..b.dim],
                })
            })
            .collect();
        serde_json::json!({
            "omega_boxes": boxes,
            "L_global": self.l_global,
            "lambda_u": self.lambda_u,
            "q": self.q,
            "deg": self.deg,
        })
    }
}

fn boxes_overlap(a: &TorusBox, b: &TorusBox) -> bool {
    (0..a.dim).all(|i| {
        let ca = 0.5 * (a.lo[i] + a.hi[i]);
        let cb = 0.5 * (b.lo[i] + b.hi[i]);
        let ha = 0.5 * (a.hi[i] - a.lo[i]);
        let hb = 0.5 * (b.hi[i] - b.lo[i]);
        circle_dist(ca, cb) < ha + hb
    })
}

fn refine_boundary(g: &BaseMap, lambda_u: f64, mut inside: f64, mut outside: f64) -> f64 {
    let f = |x: f64| g.local_lipschitz(&TorusPoint::new(&[x])) >= lambda_u;
    for _ in 0..60 {
        let mid = 0.5 * (inside + outside);
        if f(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Dense-grid scan plus bisection refinement of `{L >= lambda_u}` on the circle.
fn omega_intervals_1d(g: &BaseMap, lambda_u: f64) -> Result<Vec<TorusBox>> {
    let n = PROFILE_GRID_1D;
    let h = 1.0 / n as f64;
    let flags: Vec<bool> = (0..n)
        .map(|i| g.local_lipschitz(&TorusPoint::new(&[i as f64 * h])) >= lambda_u)
        .collect();
    if flags.iter().all(|&f| f) {
        return Err(Error::H2Violation {
            q: g.deg(),
            deg: g.deg(),
        });
    }
    let Some(start) = flags.iter().position(|&f| !f) else {
        return Ok(Vec::new());
    };
    let mut boxes = Vec::new();
    let mut i = 0;
    while i < n {
        let idx = (start + i) % n;
        if flags[idx] {
            let first = start + i;
            let mut last = first;
            while last + 1 < start + n && flags[(last + 1) % n] {
                last += 1;
            }
            let lo_in = first as f64 * h;
            let hi_in = last as f64 * h;
            let lo = refine_boundary(g, lambda_u, lo_in, lo_in - h);
            let hi = refine_boundary(g, lambda_u, hi_in, hi_in + h);
            let shift = (wrap_signed(lo) - lo).round();
            boxes.push(TorusBox::new(&[lo + shift], &[hi + shift]));
            i = last - start + 1;
        } else {
            i += 1;
        }
    }
    Ok(boxes)
}

/// Bounding box of `{L >= lambda_u}` inside the bump support, enlarged by one
/// scan step.
fn omega_box_nd(g: &BaseMap, lambda_u: f64) -> Result<Vec<TorusBox>> {
    let m = g.dim();
    let outside = 1.0 / *g.factors().iter().min().expect("m >= 1") as f64;
    if outside >= lambda_u {
        return Err(Error::H2Violation {
            q: g.deg(),
            deg: g.deg(),
        });
    }
    let per = if m == 2 { 401 } else { 81 };
    let half: Vec<f64> = (0..m).map(|i| g.support_half_width(i)).collect();
    let step: Vec<f64> = half.iter().map(|h| 2.0 * h / (per - 1) as f64).collect();
    let mut lo = [f64::INFINITY; MAX_DIM];
    let mut hi = [f64::NEG_INFINITY; MAX_DIM];
    let mut found = false;
    let mut idx = vec![0usize; m];
    loop {
        let c: Vec<f64> = (0..m).map(|i| -half[i] + step[i] * idx[i] as f64).collect();
        if g.local_lipschitz(&TorusPoint::new(&c)) >= lambda_u {
            found = true;
            for i in 0..m {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        if !advance(&mut idx, per) {
            break;
        }
    }
    if !found {
        return Ok(Vec::new());
    }
    for i in 0..m {
        lo[i] = (lo[i] - step[i]).max(-half[i]);
        hi[i] = (hi[i] + step[i]).min(half[i]);
    }
    Ok(vec![TorusBox::new(&lo[..m], &hi[..m])])
}

fn sup_over_box(g: &BaseMap, b: &TorusBox) -> f64 {
    let m = b.dim;
    let per = match m {
        1 => 20_001,
        2 => 201,
        _ => 41,
    };
    let mut sup = 0.0f64;
    let mut idx = vec![0usize; m];
    loop {
        let c: Vec<f64> = (0..m)
            .map(|i| b.lo[i] + (b.hi[i] - b.lo[i]) * idx[i] as f64 / (per - 1) as f64)
            .collect();
        sup = sup.max(g.local_lipschitz(&TorusPoint::new(&c)));
        if !advance(&mut idx, per) {
            break;
        }
    }
    sup
}

/// Scale used by the topological exactness proxy.
pub const EXACTNESS_EPS: f64 = 0.01;
/// Largest iterate tried by the exactness proxy.
pub const EXACTNESS_MAX_N: usize = 20;

/// Numerical checks of the base hypotheses, each with a margin.
pub fn verify_base_hypotheses(g: &BaseMap, profile: &ExpansionProfile, seed: u64) -> HypothesisReport {
    use rand::Rng as _;
    let m = g.dim();
    let mut pts: Vec<TorusPoint> = Vec::new();
    let per = match m {
        1 => 100_000,
        2 => 300,
        _ => 40,
    };
    let mut idx = vec![0usize; m];
    loop {
        let c: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) / per as f64).collect();
        pts.push(TorusPoint::new(&c));
        if !advance(&mut idx, per) {
            break;
        }
    }
    let mut rng = stream_rng(seed, stream::HYPOTHESES, 0);
    for _ in 0..10_000 {
        let c: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        pts.push(TorusPoint::new(&c));
    }
    // Omega itself is sampled densely too, so the sup bound is exercised.
    for b in &profile.omega {
        let per_b = if m == 1 { 2001 } else { 61 };
        let mut idx = vec![0usize; m];
        loop {
            let c: Vec<f64> = (0..m)
                .map(|i| b.lo[i] + (b.hi[i] - b.lo[i]) * idx[i] as f64 / (per_b - 1) as f64)
                .collect();
            pts.push(TorusPoint::new(&c));
            if !advance(&mut idx, per_b) {
                break;
            }
        }
    }
    let (mut off_max, mut on_max, mut min_det) = (0.0f64, 0.0f64, f64::INFINITY);
    for p in &pts {
        let l = g.local_lipschitz(p);
        if profile.in_omega(p) {
            on_max = on_max.max(l);
        } else {
            off_max = off_max.max(l);
        }
        min_det = min_det.min(g.jacobian_det(p));
    }
    let mut rep = HypothesisReport::default();
    rep.push(CheckEntry::strict_upper("H1_lipschitz_off_omega", off_max, profile.lambda_u));
    match profile.l_global {
        Some(lg) => {
            rep.push(CheckEntry::upper("H1_lipschitz_on_omega", on_max, lg));
            rep.push(CheckEntry::lower("H1_L_global_gt_1", lg, 1.0).with_note("strict"));
        }
        None => rep.push(
            CheckEntry::upper("H1_lipschitz_on_omega", 0.0, 0.0).with_note("Omega empty"),
        ),
    }
    rep.push(CheckEntry::strict_upper("H2_q_lt_deg", profile.q as f64, profile.deg as f64));
    rep.push(CheckEntry::lower("local_diffeo_min_det", min_det, 0.0).with_note("strict"));
    let n = exactness_iterate(g, EXACTNESS_EPS, EXACTNESS_MAX_N);
    rep.push(
        CheckEntry::upper(
            "exactness_iterate",
            n.map_or(f64::INFINITY, |n| n as f64),
            EXACTNESS_MAX_N as f64,
        )
        .with_note(format!("eps = {EXACTNESS_EPS}")),
    );
    rep
}

/// Smallest `n` such that `g^n` of every partition element has a point in
/// every `eps`-cell of the torus (so its image is `eps`-dense).
pub fn exactness_iterate(g: &BaseMap, eps: f64, max_n: usize) -> Option<usize> {
    let m = g.dim();
    let nb = (1.0 / eps).ceil() as usize;
    let per: usize = match m {
        1 => 4_000,
        2 => 300,
        _ => 60,
    };
    let mut worst = 0usize;
    for el in 0..g.deg() {
        let b = g.partition_box(el);
        let mut cur = Vec::with_capacity(per.pow(m as u32));
        let mut idx = vec![0usize; m];
        loop {
            let c: Vec<f64> = (0..m)
                .map(|i| b.lo[i] + (b.hi[i] - b.lo[i]) * (idx[i] as f64 + 0.5) / per as f64)
                .collect();
            cur.push(TorusPoint::new(&c));
            if !advance(&mut idx, per) {
                break;
            }
        }
        let mut found = None;
        for n in 1..=max_n {
            for p in cur.iter_mut() {
                *p = g.eval(p);
            }
            let mut hit = vec![false; nb.pow(m as u32)];
            for p in &cur {
                let mut cell = 0;
                for i in 0..m {
                    cell = cell * nb + ((p.get(i) * nb as f64) as usize).min(nb - 1);
                }
                hit[cell] = true;
            }
            if hit.iter().all(|&h| h) {
                found = Some(n);
                break;
            }
        }
        worst = worst.max(found?);
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> BaseMap {
        BaseMap::new(BaseMapConfig::linear(&[2])).unwrap()
    }

    fn pitchfork1d() -> BaseMap {
        BaseMap::new(BaseMapConfig::pitchfork(&[2], 1.05, 0.25).with_lambda_u(0.9)).unwrap()
    }

    #[test]
    fn eval_linear_examples() {
        let g = doubling();
        assert!((g.eval(&TorusPoint::new(&[0.3])).get(0) - 0.6).abs() < 1e-15);
        assert_eq!(g.eval(&TorusPoint::new(&[0.75])).get(0), 0.5);
    }

    #[test]
    fn pitchfork_fixes_origin() {
        let g = pitchfork1d();
        assert_eq!(g.eval(&TorusPoint::new(&[0.0])).get(0), 0.0);
    }

    #[test]
    fn doubling_preimages() {
        let g = doubling();
        let pre = g.inverse_branches(&TorusPoint::new(&[0.5])).unwrap();
        assert_eq!(pre.iter().map(|p| p.get(0)).collect::<Vec<_>>(), vec![0.25, 0.75]);
        let pre = g.inverse_branches(&TorusPoint::new(&[0.0])).unwrap();
        assert_eq!(pre.iter().map(|p| p.get(0)).collect::<Vec<_>>(), vec![0.0, 0.5]);
    }

    #[test]
    fn pitchfork_preimages_of_zero() {
        let g = pitchfork1d();
        let pre = g.inverse_branches(&TorusPoint::new(&[0.0])).unwrap();
        assert_eq!(pre.len(), 2);
        assert!(pre.iter().any(|p| p.dist(&TorusPoint::origin(1)) < 1e-14));
        // Bisection oracle on the monotone lift of branch 1.
        let lift = |u: f64| 2.0 * u - 1.05 / (2.0 * PI) * g.bump1(u).0 * (2.0 * PI * u).sin();
        let (mut lo, mut hi) = (0.25, 0.75);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lift(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((pre[1].get(0) - lo).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(doubling().local_lipschitz(&TorusPoint::new(&[0.37])), 0.5);
        let g = pitchfork1d();
        let l0 = g.local_lipschitz(&TorusPoint::new(&[0.0]));
        assert!((l0 - 1.0 / (2.0 - 1.05)).abs() < 1e-12);
        assert_eq!(g.local_lipschitz(&TorusPoint::new(&[0.5])), 0.5);
        let lin2 = BaseMap::new(BaseMapConfig::linear(&[2, 3])).unwrap();
        assert_eq!(lin2.local_lipschitz(&TorusPoint::new(&[0.1, 0.2])), 0.5);
    }

    #[test]
    fn degree_invariant_under_perturbation() {
        let a = BaseMap::new(BaseMapConfig::linear(&[2, 3])).unwrap();
        let b = BaseMap::new(BaseMapConfig::pitchfork(&[2, 3], 1.05, 0.25)).unwrap();
        assert_eq!(a.deg(), 6);
        assert_eq!(a.deg(), b.deg());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = BaseMapConfig::linear(&[2]);
        c.delta = 0.3;
        assert!(BaseMap::new(c).is_err());
        assert!(BaseMap::new(BaseMapConfig::pitchfork(&[2], 2.5, 0.25)).is_err());
        assert!(BaseMap::new(BaseMapConfig::linear(&[2, 2, 2, 2])).is_err());
        assert!(BaseMap::new(BaseMapConfig::pitchfork(&[2], 1.0, 0.3)).is_err());
        let rep = BaseMap::new(BaseMapConfig::linear(&[2, 2])).unwrap();
        assert_eq!(rep.warnings().len(), 1);
    }

    #[test]
    fn doubling_hypotheses_pass() {
        let g = doubling();
        let p = ExpansionProfile::build(&g, 0.7, 0.05).unwrap();
        let rep = verify_base_hypotheses(&g, &p, 7);
        assert!(rep.all_required_pass(), "{rep:?}");
        assert_eq!(exactness_iterate(&g, 0.01, 20), Some(1));
    }

    #[test]
    fn profile_doubling_is_empty() {
        let p = ExpansionProfile::build(&doubling(), 0.7, 0.05).unwrap();
        assert!(p.omega_is_empty());
        assert_eq!(p.q, 0);
        assert!(p.l_global.is_none());
    }

    #[test]
    fn profile_pitchfork_matches_grid_oracle() {
        let g = pitchfork1d();
        let p = ExpansionProfile::build(&g, 0.9, 0.05).unwrap();
        assert_eq!(p.omega.len(), 1);
        assert_eq!(p.q, 1);
        // Oracle: on the plateau |x| <= r/2 the derivative is 2 - 1.05 cos(2 pi x),
        // so the boundary solves cos(2 pi x) = (2 - 1/0.9) / 1.05.
        let edge = ((2.0 - 1.0 / 0.9) / 1.05f64).acos() / (2.0 * PI);
        let b = p.omega[0];
        assert!((b.hi[0] - edge).abs() < 1e-6, "{} vs {edge}", b.hi[0]);
        assert!((b.lo[0] + edge).abs() < 1e-6);
        let lg = p.l_global.unwrap();
        assert!((lg - 1.0 / 0.95).abs() < 1e-5);
    }

    #[test]
    fn branch_of_matches_preimage() {
        let g = BaseMap::new(BaseMapConfig::pitchfork(&[2, 3], 1.05, 0.25)).unwrap();
        let y = TorusPoint::new(&[0.03, 0.91]);
        for b in 0..g.deg() {
            let x = g.preimage(&y, b).unwrap();
            assert_eq!(g.branch_of(&x), b);
            assert!(g.eval(&x).dist(&y) <= TOL_ROOT);
        }
    }
}
