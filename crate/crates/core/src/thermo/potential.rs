//! Potentials on the solenoid and their sampled extreme values.

use std::f64::consts::PI;

use num_complex::Complex64 as Complex;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, ExpansionProfile};
use crate::error::Result;
use crate::rng::{stream, stream_rng, Rng};
use crate::solenoid::{SkewProduct, SolenoidPoint};
use crate::torus::{TorusPoint, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    /// `A cos(2 pi x_0) + B Re z_0`.
    HolderTest,
    /// `-log |det Dg|` at the base point.
    Geometric,
}

impl PotentialKind {
    pub fn name(self) -> &'static str {
        match self {
            PotentialKind::Zero => "zero",
            PotentialKind::HolderTest => "holder",
            PotentialKind::Geometric => "geo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(PotentialKind::Zero),
            "holder" | "holder_test" => Some(PotentialKind::HolderTest),
            "geo" | "geometric" => Some(PotentialKind::Geometric),
            _ => None,
        }
    }
}

/// Sampled extreme values of a potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PotentialBounds {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub sup: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub inf: f64,
    /// Supremum over points whose base lies in `Omega_rho`; `-inf` if empty.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub sup_omega: f64,
    pub samples: usize,
    /// Largest improvement that local refinement made over raw samples.
    pub refinement_gain: f64,
}

/// `t * phi + shift` for one of the built-in shapes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub amplitude: f64,
    pub fiber_weight: f64,
    pub scale: f64,
    pub shift: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            kind: PotentialKind::Zero,
            amplitude: 0.0,
            fiber_weight: 0.0,
            scale: 1.0,
            shift: 0.0,
        }
    }

    pub fn holder_test(amplitude: f64, fiber_weight: f64) -> Self {
        Potential {
            kind: PotentialKind::HolderTest,
            amplitude,
            fiber_weight,
            ..Self::zero()
        }
    }

    pub fn geometric() -> Self {
        Potential {
            kind: PotentialKind::Geometric,
            ..Self::zero()
        }
    }

    pub fn constant(c: f64) -> Self {
        Potential {
            shift: c,
            ..Self::zero()
        }
    }

    pub fn scaled(mut self, t: f64) -> Self {
        self.scale *= t;
        self.shift *= t;
        self
    }

    pub fn shifted(mut self, c: f64) -> Self {
        self.shift += c;
        self
    }

    /// Whether the value depends on the base point only.
    pub fn is_base_only(&self) -> bool {
        self.kind != PotentialKind::HolderTest || self.fiber_weight == 0.0
    }

    fn shape_base(&self, g: &BaseMap, x: &TorusPoint) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::HolderTest => self.amplitude * (2.0 * PI * x.get(0)).cos(),
            PotentialKind::Geometric => -g.jacobian_det(x).abs().ln(),
        }
    }

    fn fiber_term(&self, z: &[Complex]) -> f64 {
        if self.kind == PotentialKind::HolderTest {
            self.fiber_weight * z[0].re
        } else {
            0.0
        }
    }

    /// `phi(p)`.
    pub fn eval(&self, f: &SkewProduct, p: &SolenoidPoint) -> f64 {
        self.scale * (self.shape_base(f.base(), &p.base) + self.fiber_term(p.fiber())) + self.shift
    }

    /// The base part of `phi`, exact when [`Potential::is_base_only`].
    pub fn eval_base(&self, g: &BaseMap, x: &TorusPoint) -> f64 {
        self.scale * self.shape_base(g, x) + self.shift
    }

    /// Hölder data `(K, exponent)` with respect to `d_M`.
    ///
    /// Exact for the zero and test shapes. For the geometric shape, the
    /// Lipschitz constant of `log |det Dg|` is estimated by central
    /// differences on a grid and inflated by 10%.
    pub fn holder_data(&self, g: &BaseMap) -> (f64, f64) {
        let k = match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::HolderTest => 2.0 * PI * self.amplitude.abs() + self.fiber_weight.abs(),
            PotentialKind::Geometric => {
                if g.is_perturbed() {
                    1.1 * geometric_lipschitz(g)
                } else {
                    0.0
                }
            }
        };
        (self.scale.abs() * k, 1.0)
    }

    /// `sup`, `inf` and `sup` over `pi^{-1}(Omega_rho)` from random lifts to the
    /// attractor, each followed by `refine_steps` rounds of local search
    /// around the current best points.
    pub fn estimate_bounds(
        &self,
        f: &SkewProduct,
        profile: &ExpansionProfile,
        samples: usize,
        refine_steps: usize,
        seed: u64,
    ) -> Result<PotentialBounds> {
        let m = f.dim();
        let depth = f.holonomy_depth();
        let chunks = samples.div_ceil(CHUNK).max(1);
        let omega = &profile.omega_rho;
        let parts: Vec<Result<[Extreme; 3]>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(seed, stream::POTENTIAL, c as u64);
                let mut ext = [Extreme::max(), Extreme::min(), Extreme::max()];
                let len = CHUNK.min(samples.saturating_sub(c * CHUNK));
                for _ in 0..len {
                    let labels: Vec<usize> = (0..depth).map(|_| rng.gen_range(0..f.base().deg())).collect();
                    let b = random_base(m, &mut rng);
                    let v = self.eval(f, &lift(f, &b, &labels)?);
                    ext[0].offer(v, b, &labels);
                    ext[1].offer(v, b, &labels);
                    if !omega.is_empty() {
                        let bx = omega[rng.gen_range(0..omega.len())];
                        let c: Vec<f64> = (0..m).map(|i| bx.lo[i] + rng.gen::<f64>() * (bx.hi[i] - bx.lo[i])).collect();
                        let b = TorusPoint::new(&c);
                        if profile.in_omega_rho(&b) {
                            let v = self.eval(f, &lift(f, &b, &labels)?);
                            ext[2].offer(v, b, &labels);
                        }
                    }
                }
                Ok(ext)
            })
            .collect();
        let mut ext = [Extreme::max(), Extreme::min(), Extreme::max()];
        for p in parts {
            for (e, o) in ext.iter_mut().zip(p?) {
                e.merge(o);
            }
        }
        let raw = [ext[0].value, ext[1].value, ext[2].value];
        for (i, e) in ext.iter_mut().enumerate() {
            let restrict = i == 2;
            if e.labels.is_empty() {
                continue;
            }
            let mut h = 0.05;
            for _ in 0..refine_steps {
                for d in 0..m {
                    for s in [-1.0, 1.0] {
                        let mut delta = [0.0; MAX_DIM];
                        delta[d] = s * h;
                        let b = e.base.offset(&delta[..m]);
                        if restrict && !profile.in_omega_rho(&b) {
                            continue;
                        }
                        let v = self.eval(f, &lift(f, &b, &e.labels)?);
                        let labels = e.labels.clone();
                        e.offer(v, b, &labels);
                    }
                }
                h *= 0.5;
            }
        }
        let gain = (0..3)
            .filter(|&i| raw[i].is_finite())
            .map(|i| (ext[i].value - raw[i]).abs())
            .fold(0.0, f64::max);
        Ok(PotentialBounds {
            sup: ext[0].value,
            inf: ext[1].value,
            sup_omega: ext[2].value,
            samples,
            refinement_gain: gain,
        })
    }
}

const CHUNK: usize = 1024;

/// Point of the attractor over `b` whose backward itinerary starts with `labels`.
pub fn lift(f: &SkewProduct, b: &TorusPoint, labels: &[usize]) -> Result<SolenoidPoint> {
    let zeros = [Complex::new(0.0, 0.0); MAX_DIM];
    f.replay(b, labels, &zeros[..f.dim()])
}

fn random_base(m: usize, rng: &mut Rng) -> TorusPoint {
    let c: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    TorusPoint::new(&c)
}

fn geometric_lipschitz(g: &BaseMap) -> f64 {
    let m = g.dim();
    let per = if m == 1 { 4096 } else { 256 };
    let h = 1e-6;
    let mut idx = [0usize; MAX_DIM];
    let mut worst = 0.0f64;
    loop {
        let c: Vec<f64> = (0..m).map(|i| (idx[i] as f64 + 0.5) / per as f64).collect();
        let x = TorusPoint::new(&c);
        for d in 0..m {
            let mut e = [0.0; MAX_DIM];
            e[d] = h;
            let up = g.jacobian_det(&x.offset(&e[..m])).abs().ln();
            e[d] = -h;
            let dn = g.jacobian_det(&x.offset(&e[..m])).abs().ln();
            worst = worst.max(((up - dn) / (2.0 * h)).abs());
        }
        if !crate::base::advance(&mut idx[..m], per) {
            break;
        }
    }
    worst
}

/// Running extreme with the lift data that realizes it.
#[derive(Clone)]
struct Extreme {
    value: f64,
    sign: f64,
    base: TorusPoint,
    labels: Vec<usize>,
}

impl Extreme {
    fn max() -> Self {
        Extreme {
            value: f64::NEG_INFINITY,
            sign: 1.0,
            base: TorusPoint::origin(1),
            labels: Vec::new(),
        }
    }

    fn min() -> Self {
        Extreme {
            value: f64::INFINITY,
            sign: -1.0,
            ..Self::max()
        }
    }

    fn offer(&mut self, v: f64, b: TorusPoint, labels: &[usize]) {
        if self.sign * v > self.sign * self.value {
            self.value = v;
            self.base = b;
            self.labels = labels.to_vec();
        }
    }

    fn merge(&mut self, o: Extreme) {
        if self.sign * o.value > self.sign * self.value {
            *self = o;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseMapConfig;
    use crate::system::{System, SystemConfig};

    #[test]
    fn geometric_is_constant_on_linear_map() {
        let g = BaseMap::new(BaseMapConfig::linear(&[2])).unwrap();
        let phi = Potential::geometric();
        for x in [0.0, 0.1, 0.77] {
            let v = phi.eval_base(&g, &TorusPoint::new(&[x]));
            assert!((v + 2f64.ln()).abs() < 1e-15);
        }
        assert_eq!(phi.holder_data(&g).0, 0.0);
    }

    #[test]
    fn scaling_and_shift() {
        let g = BaseMap::new(BaseMapConfig::linear(&[3])).unwrap();
        let x = TorusPoint::new(&[0.3]);
        let phi = Potential::geometric().scaled(0.5).shifted(2.0);
        assert!((phi.eval_base(&g, &x) - (2.0 - 0.5 * 3f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn holder_constant_dominates_sampled_pairs() {
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let phi = Potential::holder_test(0.1, 0.05);
        let (k, _) = phi.holder_data(sys.base());
        let s = sys.f.attractor_sample(40, 400, 3);
        for w in s.points.windows(2) {
            let d = w[0].dist(&w[1]);
            let dv = (phi.eval(&sys.f, &w[0]) - phi.eval(&sys.f, &w[1])).abs();
            assert!(dv <= k * d + 1e-12);
        }
    }

    #[test]
    fn bounds_of_test_potential() {
        let sys = System::build(SystemConfig::pitchfork_preset()).unwrap();
        let phi = Potential::holder_test(0.1, 0.0);
        let b = phi.estimate_bounds(&sys.f, &sys.profile, 2000, 10, 1).unwrap();
        assert!((b.sup - 0.1).abs() < 1e-6 && (b.inf + 0.1).abs() < 1e-6);
        // Omega_rho is a box around the origin where cos peaks.
        assert!((b.sup_omega - 0.1).abs() < 1e-6);
    }
}
