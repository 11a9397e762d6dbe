//! Discretized transfer operator on a box grid of the base.
//!
//! Each target cell is sampled at `s^m` interior points; every inverse
//! branch carries each sample point back to a source cell. Entry `(i, j)`
//! accumulates `exp(phi(x)) / s^m` over samples of cell `i` whose preimage
//! `x` lies in cell `j`. For linear maps every preimage of a cell lies in a
//! single cell, so the discretization is exact.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::BaseMap;
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::solenoid::SkewProduct;
use crate::thermo::{lift, Potential};
use crate::torus::{TorusPoint, MAX_DIM};

/// Congruent boxes, `per[i]` along coordinate `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellGrid {
    pub per: Vec<usize>,
}

impl CellGrid {
    /// About `n_cells` boxes. In one dimension exactly `n_cells`; otherwise
    /// each axis gets a multiple of its expansion factor, proportional to it.
    pub fn new(g: &BaseMap, n_cells: usize) -> Result<Self> {
        let m = g.dim();
        if n_cells < 2 {
            return Err(Error::InvalidArgument("need at least 2 cells".into()));
        }
        if m == 1 {
            return Ok(CellGrid { per: vec![n_cells] });
        }
        let prod: f64 = g.factors().iter().map(|&k| k as f64).product();
        let r = (n_cells as f64 / prod).powf(1.0 / m as f64);
        let per = g
            .factors()
            .iter()
            .map(|&k| k as usize * (r.round() as usize).max(1))
            .collect();
        Ok(CellGrid { per })
    }

    pub fn dim(&self) -> usize {
        self.per.len()
    }

    pub fn len(&self) -> usize {
        self.per.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of the cell containing `x` (last coordinate fastest).
    pub fn cell_of(&self, x: &TorusPoint) -> usize {
        let mut idx = 0;
        for (i, &p) in self.per.iter().enumerate() {
            let c = ((x.get(i) * p as f64).floor() as usize).min(p - 1);
            idx = idx * p + c;
        }
        idx
    }

    fn corner(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rem = cell;
        for i in (0..self.dim()).rev() {
            out[i] = rem % self.per[i];
            rem /= self.per[i];
        }
        out
    }

    /// Midpoint grid of `s^m` points inside `cell`.
    pub fn sample_points(&self, cell: usize, s: usize) -> Vec<TorusPoint> {
        let m = self.dim();
        let c = self.corner(cell);
        let mut out = Vec::with_capacity(s.pow(m as u32));
        let mut idx = [0usize; MAX_DIM];
        loop {
            let x: Vec<f64> = (0..m)
                .map(|i| (c[i] as f64 + (idx[i] as f64 + 0.5) / s as f64) / self.per[i] as f64)
                .collect();
            out.push(TorusPoint::new(&x));
            if !crate::base::advance(&mut idx[..m], s) {
                break;
            }
        }
        out
    }
}

/// Preimage samples of every cell; independent of the potential.
#[derive(Clone, Debug)]
pub struct OperatorSkeleton {
    pub grid: CellGrid,
    pub quadrature: usize,
    /// `row_start[i]..row_start[i+1]` indexes the samples of target cell `i`.
    row_start: Vec<usize>,
    cols: Vec<u32>,
    points: Vec<TorusPoint>,
}

impl OperatorSkeleton {
    pub fn build(g: &BaseMap, grid: CellGrid, quadrature: usize) -> Result<Self> {
        if quadrature == 0 {
            return Err(Error::InvalidArgument("quadrature must be positive".into()));
        }
        let rows: Result<Vec<Vec<(u32, TorusPoint)>>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::new();
                for y in grid.sample_points(i, quadrature) {
                    for x in g.inverse_branches(&y)? {
                        row.push((grid.cell_of(&x) as u32, x));
                    }
                }
                Ok(row)
            })
            .collect();
        let rows = rows?;
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut points = Vec::new();
        row_start.push(0);
        for row in rows {
            for (c, x) in row {
                cols.push(c);
                points.push(x);
            }
            row_start.push(cols.len());
        }
        Ok(OperatorSkeleton {
            grid,
            quadrature,
            row_start,
            cols,
            points,
        })
    }

    /// Sparse matrix for weights `exp(phi(x)) / s^m`. Fiber-dependent
    /// potentials are evaluated at the lift with the all-zero past.
    pub fn assemble(&self, f: &SkewProduct, phi: &Potential) -> Result<SparseMatrix> {
        let w0 = 1.0 / (self.quadrature as f64).powi(self.grid.dim() as i32);
        let depth = f.holonomy_depth();
        let zeros = vec![0usize; depth];
        let phis: Result<Vec<f64>> = self
            .points
            .par_iter()
            .map(|x| {
                if phi.is_base_only() {
                    Ok(phi.eval_base(f.base(), x))
                } else {
                    Ok(phi.eval(f, &lift(f, x, &zeros)?))
                }
            })
            .collect();
        let phis = phis?;
        let n = self.grid.len();
        let mut m = SparseMatrix {
            n,
            row_start: Vec::with_capacity(n + 1),
            cols: Vec::new(),
            vals: Vec::new(),
        };
        m.row_start.push(0);
        let mut acc: Vec<(u32, f64)> = Vec::new();
        for i in 0..n {
            acc.clear();
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc.push((self.cols[k], w0 * phis[k].exp()));
            }
            acc.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < acc.len() {
                let c = acc[k].0;
                let mut v = 0.0;
                while k < acc.len() && acc[k].0 == c {
                    v += acc[k].1;
                    k += 1;
                }
                m.cols.push(c);
                m.vals.push(v);
            }
            m.row_start.push(m.cols.len());
        }
        Ok(m)
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn mul(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.vals[k] * v[self.cols[k] as usize];
            }
            out[i] = s;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0u32; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for i in 0..self.n {
            for k in self.row_start[i]..self.row_start[i + 1] {
                let c = self.cols[k] as usize;
                cols[next[c]] = i as u32;
                vals[next[c]] = self.vals[k];
                next[c] += 1;
            }
        }
        SparseMatrix {
            n: self.n,
            row_start: counts,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (self.row_start[i]..self.row_start[i + 1])
            .find(|&k| self.cols[k] as usize == j)
            .map_or(0.0, |k| self.vals[k])
    }
}

/// Power iteration residual target, relative to the eigenvalue.
pub const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

/// Leading eigenpair of a nonnegative matrix, eigenvector summing to 1.
fn power_iteration(m: &SparseMatrix) -> (f64, Vec<f64>, bool) {
    let n = m.n;
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        m.mul(&v, &mut w);
        lambda = w.iter().sum::<f64>();
        if !(lambda > 0.0) {
            return (lambda, v, false);
        }
        let res: f64 = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).sum();
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / lambda;
        }
        if res <= POWER_TOL * lambda {
            return (lambda, v, true);
        }
    }
    (lambda, v, false)
}

/// Transfer operator with its leading eigendata.
#[derive(Clone, Debug)]
pub struct TransferOperatorApprox {
    pub grid: CellGrid,
    pub matrix: SparseMatrix,
    pub eigenvalue: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub converged: bool,
    /// `|lambda_2| / lambda_max`, estimated by deflated power iteration.
    pub gap_ratio: f64,
}

impl TransferOperatorApprox {
    pub fn from_matrix(grid: CellGrid, matrix: SparseMatrix, seed: u64) -> Self {
        let (eigenvalue, right, c1) = power_iteration(&matrix);
        let (_, left, c2) = power_iteration(&matrix.transpose());
        let gap_ratio = deflated_ratio(&matrix, eigenvalue, &right, &left, seed);
        TransferOperatorApprox {
            grid,
            matrix,
            eigenvalue,
            right,
            left,
            converged: c1 && c2,
            gap_ratio,
        }
    }

    /// `log lambda_max`.
    pub fn pressure(&self) -> f64 {
        self.eigenvalue.ln()
    }

    /// `1 - |lambda_2| / lambda_max`.
    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.gap_ratio
    }

    pub fn summary_json(&self, defect: f64) -> serde_json::Value {
        use crate::report::json_f64;
        serde_json::json!({
            "n_cells": self.grid.len(),
            "per_axis": self.grid.per,
            "eigenvalue": json_f64(self.eigenvalue),
            "pressure": json_f64(self.pressure()),
            "gap_ratio": json_f64(self.gap_ratio),
            "spectral_gap": json_f64(self.spectral_gap()),
            "defect": json_f64(defect),
            "converged": self.converged,
        })
    }
}

/// Growth rate of `M` on the complement of the leading eigenvector.
fn deflated_ratio(m: &SparseMatrix, lambda: f64, right: &[f64], left: &[f64], seed: u64) -> f64 {
    let n = m.n;
    let lr: f64 = left.iter().zip(right).map(|(a, b)| a * b).sum();
    if !(lr > 0.0 && lambda > 0.0) {
        return f64::NAN;
    }
    let mut rng = stream_rng(seed, stream::SRB, 0xDEF1);
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut w = vec![0.0; n];
    let project = |u: &mut [f64]| {
        let c: f64 = left.iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>() / lr;
        for (x, r) in u.iter_mut().zip(right) {
            *x -= c * r;
        }
    };
    let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
    project(&mut u);
    let (burn, window) = (200, 100);
    let mut log_growth = 0.0;
    for it in 0..burn + window {
        let nu = norm(&u);
        if nu < 1e-300 {
            return 0.0;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        m.mul(&u, &mut w);
        project(&mut w);
        std::mem::swap(&mut u, &mut w);
        if it >= burn {
            log_growth += norm(&u).max(1e-300).ln();
        }
    }
    ((log_growth / window as f64).exp() / lambda).min(1.0)
}

/// Builds the operator for `phi` on a fresh skeleton.
pub fn build_transfer_operator(
    f: &SkewProduct,
    phi: &Potential,
    n_cells: usize,
    quadrature: usize,
    seed: u64,
) -> Result<TransferOperatorApprox> {
    let grid = CellGrid::new(f.base(), n_cells)?;
    let sk = OperatorSkeleton::build(f.base(), grid, quadrature)?;
    let m = sk.assemble(f, phi)?;
    Ok(TransferOperatorApprox::from_matrix(sk.grid.clone(), m, seed))
}

/// Gap ratios `|lambda_2| / lambda_max` of the operator for `phi` at each
/// grid size; a ratio staying below 1 is the proxy for uniqueness.
pub fn spectral_gap_trend(
    f: &SkewProduct,
    phi: &Potential,
    cells: &[usize],
    quadrature: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    cells
        .iter()
        .map(|&n| {
            let op = build_transfer_operator(f, phi, n, quadrature, seed)?;
            Ok((op.grid.len(), op.gap_ratio))
        })
        .collect()
}

/// Cell weights of an equilibrium state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureApprox {
    pub grid: CellGrid,
    pub weights: Vec<f64>,
    /// `|| mu P - mu ||_1` for the transition `P(j -> i) = M_ij l_i / (lambda l_j)`
    /// that the operator induces on cells.
    pub invariance_defect: f64,
}

impl MeasureApprox {
    /// `int u d mu` for a base function, averaging `u` over `s^m` points per cell.
    pub fn integrate(&self, s: usize, u: impl Fn(&TorusPoint) -> f64 + Sync) -> f64 {
        // Collected before summing so the result does not depend on scheduling.
        let terms: Vec<f64> = (0..self.weights.len())
            .into_par_iter()
            .map(|j| {
                if self.weights[j] == 0.0 {
                    return 0.0;
                }
                let pts = self.grid.sample_points(j, s);
                self.weights[j] * pts.iter().map(&u).sum::<f64>() / pts.len() as f64
            })
            .collect();
        terms.iter().sum()
    }

    /// `|| mu o g^{-1} - mu ||_1` when mass is spread uniformly inside cells.
    /// `push` is the geometric-potential operator on the same skeleton. Only
    /// meaningful for absolutely continuous states.
    pub fn lebesgue_push_defect(&self, push: &SparseMatrix) -> f64 {
        let mut pushed = vec![0.0; self.weights.len()];
        push.mul(&self.weights, &mut pushed);
        pushed.iter().zip(&self.weights).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Weights proportional to `left_i * right_i`.
pub fn equilibrium_measure(op: &TransferOperatorApprox) -> MeasureApprox {
    let mut w: Vec<f64> = op.left.iter().zip(&op.right).map(|(a, b)| (a * b).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let m = &op.matrix;
    let mut pushed = vec![0.0; w.len()];
    for (i, p) in pushed.iter_mut().enumerate() {
        for k in m.row_start[i]..m.row_start[i + 1] {
            let j = m.cols[k] as usize;
            if op.left[j] > 0.0 {
                *p += w[j] * m.vals[k] * op.left[i] / (op.eigenvalue * op.left[j]);
            }
        }
    }
    let defect = pushed.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
    MeasureApprox {
        grid: op.grid.clone(),
        weights: w,
        invariance_defect: defect,
    }
}
