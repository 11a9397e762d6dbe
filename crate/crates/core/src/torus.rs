//! Points of the flat torus `T^m` (m <= 3) and the max-coordinate metric.

use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

/// Reduce a real number to `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `x mod 1` in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_signed(x: f64) -> f64 {
    let r = wrap(x);
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Circle distance between two reals read mod 1.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(1.0 - d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl TorusPoint {
    /// Builds a normalized point. Panics if `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "torus dimension must be 1..=3"
        );
        let mut c = [0.0; MAX_DIM];
        for (dst, &src) in c.iter_mut().zip(coords) {
            *dst = wrap(src);
        }
        TorusPoint {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint::new(&vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// Flat torus metric `d_N` (max over coordinates of the circle distance).
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(&a, &b)| circle_dist(a, b))
            .fold(0.0, f64::max)
    }

    /// Translate by `delta` and renormalize.
    pub fn offset(&self, delta: &[f64]) -> TorusPoint {
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim {
            c[i] = self.coords[i] + delta.get(i).copied().unwrap_or(0.0);
        }
        TorusPoint::new(&c[..self.dim])
    }
}

/// An axis-aligned box on the torus, stored unwrapped (`lo <= hi`, side < 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub dim: usize,
}

impl TorusBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Self {
        let mut l = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        l[..lo.len()].copy_from_slice(lo);
        h[..hi.len()].copy_from_slice(hi);
        TorusBox {
            lo: l,
            hi: h,
            dim: lo.len(),
        }
    }

    /// Max-metric distance from `p` to the box (0 inside).
    pub fn dist(&self, p: &TorusPoint) -> f64 {
        (0..self.dim)
            .map(|i| {
                let c = 0.5 * (self.lo[i] + self.hi[i]);
                let half = 0.5 * (self.hi[i] - self.lo[i]);
                (circle_dist(p.get(i), c) - half).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, p: &TorusPoint) -> bool {
        self.dist(p) == 0.0
    }

    pub fn enlarged(&self, r: f64) -> TorusBox {
        let mut b = *self;
        for i in 0..self.dim {
            b.lo[i] -= r;
            b.hi[i] += r;
        }
        b
    }
}
