//! Bowen metrics, greedy separated sets, partition sums and pressure
//! estimates over the collections `ALL`, good and bad segments.

use std::collections::HashMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::potential::{lift, Potential};
use crate::base::{BaseMap, ExpansionProfile};
use crate::decomposition::{is_bad, is_good, OrbitSegment};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::solenoid::{SkewProduct, SolenoidPoint};
use crate::torus::{TorusPoint, MAX_DIM};

/// A space with a map and a metric, enough to define Bowen balls.
pub trait BowenSpace: Sync {
    type Point: Copy + Send + Sync;

    fn step(&self, p: &Self::Point) -> Self::Point;
    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;
    /// `(circle coordinates, flat coordinates)` used for cell keys.
    fn cell_dims(&self) -> (usize, usize);
    /// Cell indices of `p` at scale `eps`: circle coordinates are cut into
    /// `per` arcs, flat ones into intervals of length `eps`.
    fn write_cell(&self, p: &Self::Point, eps: f64, per: usize, out: &mut [i32]);
}

impl BowenSpace for BaseMap {
    type Point = TorusPoint;

    fn step(&self, p: &TorusPoint) -> TorusPoint {
        self.eval(p)
    }

    fn distance(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        a.dist(b)
    }

    fn cell_dims(&self) -> (usize, usize) {
        (self.dim(), 0)
    }

    fn write_cell(&self, p: &TorusPoint, _eps: f64, per: usize, out: &mut [i32]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = arc(p.get(i), per);
        }
    }
}

impl BowenSpace for SkewProduct {
    type Point = SolenoidPoint;

    fn step(&self, p: &SolenoidPoint) -> SolenoidPoint {
        self.eval(p)
    }

    fn distance(&self, a: &SolenoidPoint, b: &SolenoidPoint) -> f64 {
        a.dist(b)
    }

    fn cell_dims(&self) -> (usize, usize) {
        (self.dim(), 2 * self.dim())
    }

    fn write_cell(&self, p: &SolenoidPoint, eps: f64, per: usize, out: &mut [i32]) {
        let m = self.dim();
        for i in 0..m {
            out[i] = arc(p.base.get(i), per);
            out[m + 2 * i] = (p.fiber()[i].re / eps).floor() as i32;
            out[m + 2 * i + 1] = (p.fiber()[i].im / eps).floor() as i32;
        }
    }
}

fn arc(x: f64, per: usize) -> i32 {
    ((x * per as f64).floor() as i32).clamp(0, per as i32 - 1)
}

/// `d_n(x, y) = max_{0 <= k < n} d(f^k x, f^k y)`; zero for `n = 0`.
pub fn bowen_distance<S: BowenSpace>(s: &S, x: &S::Point, y: &S::Point, n: usize) -> f64 {
    let (mut a, mut b) = (*x, *y);
    let mut d = 0.0f64;
    for k in 0..n {
        d = d.max(s.distance(&a, &b));
        if k + 1 < n {
            a = s.step(&a);
            b = s.step(&b);
        }
    }
    d
}

/// `S_n phi(x) = sum_{k < n} phi(f^k x)`.
pub fn birkhoff_sum(f: &SkewProduct, phi: &Potential, x: &SolenoidPoint, n: usize) -> f64 {
    let mut p = *x;
    let mut s = 0.0;
    for _ in 0..n {
        s += phi.eval(f, &p);
        p = f.eval(&p);
    }
    s
}

type Cell = [i32; 3 * MAX_DIM];
const NIL: u32 = u32::MAX;

/// Levels of the orbit used as trie keys: `0, 1, 2, 4, 8, ...` and `n - 1`.
fn key_levels(n: usize) -> Vec<usize> {
    let mut v = vec![0];
    let mut k = 1;
    while k < n {
        v.push(k);
        k *= 2;
    }
    if n > 1 && *v.last().expect("nonempty") != n - 1 {
        v.push(n - 1);
    }
    v
}

#[derive(Clone)]
struct Node {
    cell: Cell,
    child: u32,
    sibling: u32,
    member: u32,
}

/// Prefix tree over the cell keys of kept points. Two points at Bowen
/// distance `< eps` have adjacent cells at every level, so a query only
/// descends into adjacent children.
struct CellTrie {
    /// Base-only cell of level 0 -> node; the root fans out widely.
    roots: HashMap<[i32; MAX_DIM], u32>,
    nodes: Vec<Node>,
    next_member: Vec<u32>,
    circ: usize,
    dims: usize,
    per: i32,
}

impl CellTrie {
    fn new(circ: usize, flat: usize, per: usize) -> Self {
        CellTrie {
            roots: HashMap::new(),
            nodes: Vec::new(),
            next_member: Vec::new(),
            circ,
            dims: circ + flat,
            per: per as i32,
        }
    }

    fn adjacent(&self, a: &Cell, b: &Cell) -> bool {
        for i in 0..self.dims {
            let d = a[i] - b[i];
            if i < self.circ {
                if self.per > 3 {
                    let r = d.rem_euclid(self.per);
                    if r > 1 && r < self.per - 1 {
                        return false;
                    }
                }
            } else if d.abs() > 1 {
                return false;
            }
        }
        true
    }

    fn new_node(&mut self, cell: Cell, sibling: u32) -> u32 {
        self.nodes.push(Node {
            cell,
            child: NIL,
            sibling,
            member: NIL,
        });
        self.nodes.len() as u32 - 1
    }

    fn base_key(&self, key: &Cell) -> [i32; MAX_DIM] {
        let mut b = [0; MAX_DIM];
        b[..self.circ].copy_from_slice(&key[..self.circ]);
        b
    }

    fn insert(&mut self, keys: &[Cell], slot: u32) {
        let bk = self.base_key(&keys[0]);
        let mut node = match self.roots.get(&bk) {
            Some(&r) => r as usize,
            None => {
                let r = self.new_node([0; 3 * MAX_DIM], NIL);
                self.roots.insert(bk, r);
                r as usize
            }
        };
        for key in keys {
            let mut c = self.nodes[node].child;
            while c != NIL && self.nodes[c as usize].cell[..self.dims] != key[..self.dims] {
                c = self.nodes[c as usize].sibling;
            }
            if c == NIL {
                let sibling = self.nodes[node].child;
                c = self.new_node(*key, sibling);
                self.nodes[node].child = c;
            }
            node = c as usize;
        }
        debug_assert_eq!(self.next_member.len(), slot as usize);
        self.next_member.push(self.nodes[node].member);
        self.nodes[node].member = slot;
    }

    /// Calls `hit` on members in cells adjacent at every level until it
    /// returns `true`.
    fn any_near(&self, keys: &[Cell], mut hit: impl FnMut(u32) -> bool) -> bool {
        let mut stack = Vec::new();
        let bk = self.base_key(&keys[0]);
        // Neighbouring arcs per circle coordinate, without repeats.
        let shifts: Vec<i32> = if self.per <= 3 { (0..self.per).collect() } else { vec![-1, 0, 1] };
        let mut idx = [0usize; MAX_DIM];
        loop {
            let mut k = [0; MAX_DIM];
            for i in 0..self.circ {
                k[i] = if self.per <= 3 {
                    shifts[idx[i]]
                } else {
                    (bk[i] + shifts[idx[i]]).rem_euclid(self.per)
                };
            }
            if let Some(&r) = self.roots.get(&k) {
                stack.push((r as usize, 0usize));
            }
            if !crate::base::advance(&mut idx[..self.circ], shifts.len()) {
                break;
            }
        }
        while let Some((node, level)) = stack.pop() {
            if level == keys.len() {
                let mut mbr = self.nodes[node].member;
                while mbr != NIL {
                    if hit(mbr) {
                        return true;
                    }
                    mbr = self.next_member[mbr as usize];
                }
                continue;
            }
            let mut c = self.nodes[node].child;
            while c != NIL {
                if self.adjacent(&self.nodes[c as usize].cell, &keys[level]) {
                    stack.push((c as usize, level + 1));
                }
                c = self.nodes[c as usize].sibling;
            }
        }
        false
    }
}

/// Greedy `(n, eps)`-separated subset of a candidate list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparatedSet {
    /// Indices into the candidate list, in the order they were kept.
    pub members: Vec<usize>,
    pub scanned: usize,
    /// The budget ran out before all candidates were scanned.
    pub saturated: bool,
}

/// Keeps a candidate iff its `d_n` distance to every kept point is `>= eps`.
/// Deterministic for a fixed candidate order.
pub fn build_separated_set<S: BowenSpace>(
    s: &S,
    candidates: &[S::Point],
    n: usize,
    eps: f64,
    budget: usize,
) -> Result<SeparatedSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let (circ, flat) = s.cell_dims();
    let per = ((1.0 / eps).floor() as usize).max(1);
    let levels = key_levels(n);
    let mut trie = CellTrie::new(circ, flat, per);
    let mut kept_pts: Vec<S::Point> = Vec::new();
    let mut members = Vec::new();
    let scanned = candidates.len().min(budget);
    let mut orbit = Vec::with_capacity(n);
    let mut keys = vec![[0i32; 3 * MAX_DIM]; levels.len()];
    for (idx, c) in candidates.iter().take(scanned).enumerate() {
        orbit.clear();
        let mut p = *c;
        for k in 0..n {
            orbit.push(p);
            if k + 1 < n {
                p = s.step(&p);
            }
        }
        for (key, &lv) in keys.iter_mut().zip(&levels) {
            s.write_cell(&orbit[lv], eps, per, key);
        }
        let close = trie.any_near(&keys, |slot| {
            let mut q = kept_pts[slot as usize];
            for (k, o) in orbit.iter().enumerate() {
                if s.distance(o, &q) >= eps {
                    return false;
                }
                if k + 1 < n {
                    q = s.step(&q);
                }
            }
            true
        });
        if !close {
            trie.insert(&keys, kept_pts.len() as u32);
            kept_pts.push(*c);
            members.push(idx);
        }
    }
    Ok(SeparatedSet {
        members,
        scanned,
        saturated: scanned < candidates.len(),
    })
}

/// Pairwise check of the separation property (quadratic; for tests and
/// small sets).
pub fn is_separated<S: BowenSpace>(s: &S, points: &[S::Point], n: usize, eps: f64) -> bool {
    for i in 0..points.len() {
        for j in 0..i {
            if bowen_distance(s, &points[i], &points[j], n) < eps {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Collection {
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "G")]
    Good,
    #[serde(rename = "S")]
    Bad,
}

impl Collection {
    pub fn name(self) -> &'static str {
        match self {
            Collection::All => "all",
            Collection::Good => "G",
            Collection::Bad => "S",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" | "ALL" => Some(Collection::All),
            "G" | "g" | "good" => Some(Collection::Good),
            "S" | "s" | "bad" => Some(Collection::Bad),
            _ => None,
        }
    }
}

/// Candidate budget for one `(n, eps)` cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CandidateBudget {
    /// Cap on grid candidates for `ALL` and the good collection.
    pub max_candidates: usize,
    /// Steered draws for the bad collection.
    pub steered: usize,
}

impl Default for CandidateBudget {
    fn default() -> Self {
        CandidateBudget {
            max_candidates: 2_000_000,
            steered: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CandidatePool {
    pub points: Vec<SolenoidPoint>,
    /// Resolution was reduced to respect the budget.
    pub capped: bool,
}

/// Number of leading backward labels that move the fiber by `>= eps / 2`.
fn fiber_levels(f: &SkewProduct, eps: f64) -> usize {
    let ls = f.lambda_s();
    let mut j = 0;
    while 2.0 * f.fiber_scale() * ls.powi(j as i32) / (1.0 - ls) >= 0.5 * eps && j < 8 {
        j += 1;
    }
    j
}

/// Base grid fine enough to resolve `(n, eps)` Bowen balls, each point
/// lifted to the attractor once per distinguishable short past.
fn grid_candidates(f: &SkewProduct, n: usize, eps: f64, max: usize) -> Result<CandidatePool> {
    let g = f.base();
    let m = g.dim();
    let deg = g.deg();
    let mut j = fiber_levels(f, eps);
    while j > 0 && deg.pow(j as u32) > max / 16 {
        j -= 1;
    }
    let pasts = deg.pow(j as u32);
    let mut per = [0usize; MAX_DIM];
    let mut total = pasts as f64;
    for i in 0..m {
        let k = g.factors()[i] as f64;
        per[i] = (2.0 * k.powi(n as i32 - 1) / eps).ceil().max(1.0) as usize;
        total *= per[i] as f64;
    }
    let capped = total > max as f64;
    if capped {
        let shrink = (max as f64 / total).powf(1.0 / m as f64);
        for p in per.iter_mut().take(m) {
            *p = ((*p as f64 * shrink).floor() as usize).max(1);
        }
    }
    let cells: usize = per[..m].iter().product();
    let depth = f.holonomy_depth().max(j);
    let points: Result<Vec<Vec<SolenoidPoint>>> = (0..cells)
        .into_par_iter()
        .with_min_len(1024)
        .map(|c| {
            let mut rem = c;
            let mut x = [0.0; MAX_DIM];
            for i in (0..m).rev() {
                x[i] = ((rem % per[i]) as f64 + 0.5) / per[i] as f64;
                rem /= per[i];
            }
            let b = TorusPoint::new(&x[..m]);
            let mut labels = vec![0usize; depth];
            let mut out = Vec::with_capacity(pasts);
            for w in 0..pasts {
                let mut r = w;
                for l in labels.iter_mut().take(j) {
                    *l = r % deg;
                    r /= deg;
                }
                out.push(lift(f, &b, &labels)?);
            }
            Ok(out)
        })
        .collect();
    Ok(CandidatePool {
        points: points?.into_iter().flatten().collect(),
        capped,
    })
}

/// Backward orbits that prefer preimages in `Omega_rho`, kept when the
/// forward segment of length `n` is bad.
fn steered_candidates(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    alpha: f64,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SolenoidPoint>> {
    if profile.omega_is_empty() {
        return Ok(Vec::new());
    }
    let g = f.base();
    let m = g.dim();
    let depth = f.holonomy_depth();
    const CHUNK: usize = 1024;
    let parts: Result<Vec<Vec<SolenoidPoint>>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream::STEERING, ((n as u64) << 32) | c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            let mut out = Vec::new();
            for _ in 0..len {
                let coords: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
                let mut y = TorusPoint::new(&coords);
                for _ in 0..n {
                    let mut inside = Vec::new();
                    if rng.gen::<f64>() < 0.9 {
                        for b in near_omega_branches(g, profile, &y) {
                            let x = g.preimage(&y, b)?;
                            if profile.in_omega_rho(&x) {
                                inside.push(x);
                            }
                        }
                    }
                    y = if inside.is_empty() {
                        g.preimage(&y, rng.gen_range(0..g.deg()))?
                    } else {
                        inside[rng.gen_range(0..inside.len())]
                    };
                }
                let labels: Vec<usize> = (0..depth).map(|_| rng.gen_range(0..g.deg())).collect();
                let p = lift(f, &y, &labels)?;
                if is_bad(&OrbitSegment::new(f, profile, p, n).itinerary, alpha) {
                    out.push(p);
                }
            }
            Ok(out)
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

/// Branches whose preimage of `y` can meet `Omega_rho`: the linear-model
/// preimage is within the perturbation's displacement of it.
fn near_omega_branches(g: &BaseMap, profile: &ExpansionProfile, y: &TorusPoint) -> Vec<usize> {
    let m = g.dim();
    let slack = g.config().delta / (2.0 * std::f64::consts::PI * g.factors()[g.weak_coordinate()] as f64);
    (0..g.deg())
        .filter(|&b| {
            let labels = g.branch_labels(b);
            let x: Vec<f64> = (0..m)
                .map(|i| (y.get(i) + labels[i] as f64) / g.factors()[i] as f64)
                .collect();
            let x = TorusPoint::new(&x);
            profile.omega.iter().any(|bx| bx.dist(&x) < profile.rho + slack + 1e-9)
        })
        .collect()
}

/// Candidate starting points of segments of length `n` in a collection.
#[allow(clippy::too_many_arguments)]
pub fn collection_candidates(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    alpha: f64,
    collection: Collection,
    n: usize,
    eps: f64,
    budget: &CandidateBudget,
    seed: u64,
) -> Result<CandidatePool> {
    match collection {
        Collection::All => grid_candidates(f, n, eps, budget.max_candidates),
        Collection::Good => {
            let mut pool = grid_candidates(f, n, eps, budget.max_candidates)?;
            pool.points = pool
                .points
                .into_par_iter()
                .filter(|p| is_good(&OrbitSegment::new(f, profile, *p, n).itinerary, alpha))
                .collect();
            Ok(pool)
        }
        Collection::Bad => Ok(CandidatePool {
            points: steered_candidates(f, profile, alpha, n, budget.steered, seed)?,
            capped: false,
        }),
    }
}

/// `log Lambda_n` over a greedy separated set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionSum {
    /// `-inf` for an empty collection.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub log_sum: f64,
    pub size: usize,
    pub candidates: usize,
    pub saturated: bool,
}

/// Log of `sum_{x in E} exp(S_n phi(x))` for the separated set `E` built
/// greedily from candidates sorted by decreasing `S_n phi`. A lower bound
/// for the supremum over separated sets.
pub fn partition_sum(
    f: &SkewProduct,
    phi: &Potential,
    candidates: &[SolenoidPoint],
    n: usize,
    eps: f64,
    budget: usize,
) -> Result<PartitionSum> {
    let weights: Vec<f64> = candidates.par_iter().map(|p| birkhoff_sum(f, phi, p, n)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let sorted: Vec<SolenoidPoint> = order.iter().map(|&i| candidates[i]).collect();
    let set = build_separated_set(f, &sorted, n, eps, budget)?;
    let log_sum = log_sum_exp(set.members.iter().map(|&i| weights[order[i]]));
    Ok(PartitionSum {
        log_sum,
        size: set.members.len(),
        candidates: candidates.len(),
        saturated: set.saturated,
    })
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|w| (w - mx).exp()).sum::<f64>().ln()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureSchedules {
    /// Decreasing scales.
    pub epsilons: Vec<f64>,
    /// Increasing segment lengths.
    pub ns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub collection: Collection,
    pub phi_kind: String,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    /// `log_sums[e][k]` for `epsilons[e]`, `ns[k]`.
    pub log_sums: Vec<Vec<f64>>,
    pub sizes: Vec<Vec<usize>>,
    pub capped: Vec<Vec<bool>>,
    /// Least-squares slope per scale.
    pub value_at_scale: Vec<f64>,
    /// Slope at the smallest scale.
    pub pressure: f64,
    /// Difference between the two smallest scales.
    pub uncertainty: f64,
    pub unreliable: bool,
}

/// Slope of `log Lambda_n` against `n` over the top half of the schedule.
pub fn fit_slope(ns: &[usize], ys: &[f64]) -> f64 {
    let k = ns.len();
    if k == 0 {
        return f64::NAN;
    }
    if ys.contains(&f64::NEG_INFINITY) {
        return f64::NEG_INFINITY;
    }
    if k == 1 {
        return ys[0] / ns[0] as f64;
    }
    let start = k - k.div_ceil(2).max(2);
    let xs: Vec<f64> = ns[start..].iter().map(|&n| n as f64).collect();
    let ys = &ys[start..];
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Pressure of `phi` on a collection from partition sums over the
/// `(eps, n)` schedule.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pressure(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    alpha: f64,
    phi: &Potential,
    collection: Collection,
    schedules: &PressureSchedules,
    budget: &CandidateBudget,
    seed: u64,
) -> Result<PressureEstimate> {
    if schedules.epsilons.is_empty() || schedules.ns.is_empty() {
        return Err(Error::InvalidArgument("pressure schedules must be nonempty".into()));
    }
    let cells: Vec<(usize, usize)> = (0..schedules.epsilons.len())
        .flat_map(|e| (0..schedules.ns.len()).map(move |k| (e, k)))
        .collect();
    let results: Vec<Result<(PartitionSum, bool)>> = cells
        .par_iter()
        .map(|&(e, k)| {
            let (eps, n) = (schedules.epsilons[e], schedules.ns[k]);
            let pool = collection_candidates(f, profile, alpha, collection, n, eps, budget, seed)?;
            let ps = partition_sum(f, phi, &pool.points, n, eps, usize::MAX)?;
            Ok((ps, pool.capped))
        })
        .collect();
    let ne = schedules.epsilons.len();
    let nn = schedules.ns.len();
    let mut log_sums = vec![vec![0.0; nn]; ne];
    let mut sizes = vec![vec![0; nn]; ne];
    let mut capped = vec![vec![false; nn]; ne];
    for (&(e, k), r) in cells.iter().zip(results) {
        let (ps, cap) = r?;
        log_sums[e][k] = ps.log_sum;
        sizes[e][k] = ps.size;
        capped[e][k] = cap || ps.saturated;
    }
    let value_at_scale: Vec<f64> = log_sums.iter().map(|row| fit_slope(&schedules.ns, row)).collect();
    let pressure = value_at_scale[ne - 1];
    let uncertainty = if ne >= 2 {
        (value_at_scale[ne - 1] - value_at_scale[ne - 2]).abs()
    } else {
        f64::NAN
    };
    Ok(PressureEstimate {
        collection,
        phi_kind: phi.kind.name().to_string(),
        epsilons: schedules.epsilons.clone(),
        ns: schedules.ns.clone(),
        unreliable: capped[ne - 1][nn - 1],
        log_sums,
        sizes,
        capped,
        value_at_scale,
        pressure,
        uncertainty,
    })
}

/// Entropy: the zero-potential pressure.
pub fn estimate_entropy(
    f: &SkewProduct,
    profile: &ExpansionProfile,
    alpha: f64,
    collection: Collection,
    schedules: &PressureSchedules,
    budget: &CandidateBudget,
    seed: u64,
) -> Result<PressureEstimate> {
    estimate_pressure(f, profile, alpha, &Potential::zero(), collection, schedules, budget, seed)
}

impl PressureEstimate {
    /// Rows `epsilon,n,log_partition_sum,slope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# schema_version=1\nepsilon,n,log_partition_sum,slope\n");
        for (e, eps) in self.epsilons.iter().enumerate() {
            for (k, n) in self.ns.iter().enumerate() {
                out.push_str(&format!(
                    "{eps},{n},{},{}\n",
                    fmt_f64(self.log_sums[e][k]),
                    fmt_f64(self.value_at_scale[e])
                ));
            }
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        use crate::report::json_f64;
        let mut flags = Vec::new();
        if self.unreliable {
            flags.push("saturated_at_largest_n");
        }
        if self.capped.iter().flatten().any(|c| *c) {
            flags.push("resolution_capped");
        }
        flags.push("greedy_lower_bound");
        serde_json::json!({
            "collection": self.collection,
            "phi_kind": self.phi_kind,
            "pressure": json_f64(self.pressure),
            "uncertainty": json_f64(self.uncertainty),
            "value_at_scale": self.value_at_scale.iter().map(|v| json_f64(*v)).collect::<Vec<_>>(),
            "flags": flags,
        })
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseMapConfig;
    use crate::system::{System, SystemConfig};
    use num_complex::Complex64;

    fn doubling() -> BaseMap {
        BaseMap::new(BaseMapConfig::linear(&[2])).unwrap()
    }

    fn grid(k: usize) -> Vec<TorusPoint> {
        (0..k).map(|i| TorusPoint::new(&[i as f64 / k as f64])).collect()
    }

    #[test]
    fn bowen_distance_trivia() {
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let s = sys.f.attractor_sample(30, 2, 5);
        let (x, y) = (s.points[0], s.points[1]);
        assert_eq!(bowen_distance(&sys.f, &x, &y, 1), x.dist(&y));
        assert_eq!(bowen_distance(&sys.f, &x, &x, 9), 0.0);
    }

    #[test]
    fn bowen_distance_doubling_gap() {
        let g = doubling();
        let gap = 2f64.powi(-10);
        let (x, y) = (TorusPoint::new(&[0.1]), TorusPoint::new(&[0.1 + gap]));
        let d = bowen_distance(&g, &x, &y, 8);
        assert!((d - 0.125).abs() < 1e-12, "{d}");

        // On the solenoid the fiber gap at step k is
        // sum_{i<k} lambda^(k-1-i) s (cis(2^i a) - cis(2^i b)).
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let z = [Complex64::new(0.1, -0.2)];
        let (px, py) = (SolenoidPoint::new(x, &z), SolenoidPoint::new(y, &z));
        let cis = |t: f64| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t);
        let mut oracle = 0.0f64;
        for k in 0..8 {
            let mut dz = Complex64::new(0.0, 0.0);
            for i in 0..k {
                let (a, b) = (0.1 * 2f64.powi(i), (0.1 + gap) * 2f64.powi(i));
                dz += 0.25f64.powi(k - 1 - i) * 0.5 * (cis(a) - cis(b));
            }
            oracle = oracle.max(dz.norm()).max(gap * 2f64.powi(k));
        }
        let d = bowen_distance(&sys.f, &px, &py, 8);
        assert!((d - oracle).abs() < 1e-12, "{d} vs {oracle}");
        assert!(d > 0.125);
    }

    #[test]
    fn birkhoff_examples() {
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let p = sys.f.attractor_sample(30, 1, 1).points[0];
        assert_eq!(birkhoff_sum(&sys.f, &Potential::constant(0.3), &p, 0), 0.0);
        assert!((birkhoff_sum(&sys.f, &Potential::constant(0.3), &p, 7) - 2.1).abs() < 1e-14);
        let geo = birkhoff_sum(&sys.f, &Potential::geometric(), &p, 10);
        assert!((geo + 10.0 * 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn separated_sets_on_doubling() {
        let g = doubling();
        let cand = grid(10_000);
        let s = build_separated_set(&g, &cand, 3, 0.25, usize::MAX).unwrap();
        assert_eq!(s.members.len(), 16);
        let pts: Vec<TorusPoint> = s.members.iter().map(|&i| cand[i]).collect();
        assert!(is_separated(&g, &pts, 3, 0.25));
        assert_eq!(build_separated_set(&g, &cand, 1, 0.5, usize::MAX).unwrap().members.len(), 2);
        assert_eq!(build_separated_set(&g, &cand, 4, 0.6, usize::MAX).unwrap().members.len(), 1);
        let capped = build_separated_set(&g, &cand, 3, 0.25, 100).unwrap();
        assert!(capped.saturated && capped.scanned == 100);
    }

    #[test]
    fn greedy_matches_quadratic_reference() {
        let sys = System::build(SystemConfig::pitchfork_preset()).unwrap();
        let cand = sys.f.attractor_sample(20, 1500, 4).points;
        for (n, eps) in [(1, 0.2), (3, 0.1), (6, 0.05)] {
            let fast = build_separated_set(&sys.f, &cand, n, eps, usize::MAX).unwrap();
            let mut slow: Vec<usize> = Vec::new();
            for (i, c) in cand.iter().enumerate() {
                if slow.iter().all(|&j| bowen_distance(&sys.f, c, &cand[j], n) >= eps) {
                    slow.push(i);
                }
            }
            assert_eq!(fast.members, slow, "n {n} eps {eps}");
        }
    }

    #[test]
    fn partition_sum_shift_and_empty() {
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let pool = grid_candidates(&sys.f, 5, 0.1, 100_000).unwrap();
        let phi = Potential::holder_test(0.2, 0.1);
        let a = partition_sum(&sys.f, &phi, &pool.points, 5, 0.1, usize::MAX).unwrap();
        let b = partition_sum(&sys.f, &phi.clone().shifted(0.7), &pool.points, 5, 0.1, usize::MAX).unwrap();
        assert_eq!(a.size, b.size);
        assert!((b.log_sum - a.log_sum - 3.5).abs() < 1e-9);
        let z = partition_sum(&sys.f, &Potential::zero(), &pool.points, 5, 0.1, usize::MAX).unwrap();
        assert!((z.log_sum - (z.size as f64).ln()).abs() < 1e-12);
        let bad = collection_candidates(
            &sys.f,
            &sys.profile,
            0.8,
            Collection::Bad,
            5,
            0.1,
            &CandidateBudget::default(),
            1,
        )
        .unwrap();
        let e = partition_sum(&sys.f, &phi, &bad.points, 5, 0.1, usize::MAX).unwrap();
        assert_eq!(e.log_sum, f64::NEG_INFINITY);
    }

    #[test]
    fn larger_scale_keeps_fewer_points() {
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let pool = grid_candidates(&sys.f, 6, 0.05, 200_000).unwrap();
        let sizes: Vec<usize> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&e| build_separated_set(&sys.f, &pool.points, 6, e, usize::MAX).unwrap().members.len())
            .collect();
        assert!(sizes[0] >= sizes[1] && sizes[1] >= sizes[2], "{sizes:?}");
    }

    #[test]
    fn slope_fit() {
        let ns = [2, 4, 6, 8];
        let ys: Vec<f64> = ns.iter().map(|&n| 1.0 + 0.5 * n as f64).collect();
        assert!((fit_slope(&ns, &ys) - 0.5).abs() < 1e-14);
        assert_eq!(fit_slope(&ns, &[0.0, f64::NEG_INFINITY, 1.0, 2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn entropy_is_zero_potential_pressure() {
        let sys = System::build(SystemConfig::linear_preset()).unwrap();
        let sch = PressureSchedules {
            epsilons: vec![0.1],
            ns: vec![2, 3, 4, 5],
        };
        let b = CandidateBudget::default();
        let h = estimate_entropy(&sys.f, &sys.profile, 0.8, Collection::All, &sch, &b, 3).unwrap();
        let p = estimate_pressure(&sys.f, &sys.profile, 0.8, &Potential::zero(), Collection::All, &sch, &b, 3).unwrap();
        assert_eq!(format!("{h:?}"), format!("{p:?}"));
        assert!((h.pressure - 2f64.ln()).abs() < 0.05);
        let c = estimate_pressure(&sys.f, &sys.profile, 0.8, &Potential::constant(0.25), Collection::All, &sch, &b, 3)
            .unwrap();
        assert!((c.pressure - h.pressure - 0.25).abs() < 1e-9);
    }
}
