//! Gaussian free field on the `d`-regular tree, robust and pruned root
//! components, and Monte Carlo survival estimates.
//!
//! Tree vertices are addressed by `(level, index)`. The root is `(0, 0)`,
//! its children are `(1, 0..d)`, and the children of `(l, i)` for `l >= 1`
//! are `(l + 1, i (d-1) + j)` for `j < d - 1`. All randomness attached to a
//! vertex is a keyed draw (see [`crate::rng`]), so the field on the infinite
//! tree is fixed by the seed and can be explored lazily. A materialised
//! [`TreeSample`] and the lazy explorers agree bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{derive_seed, keyed_normal, keyed_uniform, tag};

/// A lower threshold that may be `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    NegInfinity,
    Finite(f64),
}

impl Threshold {
    #[inline]
    pub fn admits(self, v: f64) -> bool {
        match self {
            Threshold::NegInfinity => true,
            Threshold::Finite(g) => v >= g,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Threshold::Finite(_))
    }

    /// `-inf` as `f64::NEG_INFINITY`, for display and serialisation.
    pub fn as_f64(self) -> f64 {
        match self {
            Threshold::NegInfinity => f64::NEG_INFINITY,
            Threshold::Finite(g) => g,
        }
    }
}

impl From<f64> for Threshold {
    fn from(v: f64) -> Self {
        if v == f64::NEG_INFINITY {
            Threshold::NegInfinity
        } else {
            Threshold::Finite(v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("degree {0} is below 3")]
    Degree(usize),
    #[error("sprinkle strength t = {0} outside [0, 1)")]
    BadStrength(f64),
    #[error("pruning needs depth >= 1 so every reported vertex has its children")]
    DepthMargin,
    #[error("pruned field missing; call prune_field first")]
    NotPruned,
}

/// Number of vertices on level `l`.
pub fn level_size(d: usize, l: usize) -> usize {
    if l == 0 {
        1
    } else {
        d * (d - 1).pow(l as u32 - 1)
    }
}

/// Index range of the children of `(l, i)` on level `l + 1`.
#[inline]
pub fn children(d: usize, l: usize, i: u64) -> core::ops::Range<u64> {
    if l == 0 {
        0..d as u64
    } else {
        let k = (d - 1) as u64;
        i * k..(i + 1) * k
    }
}

/// Index of the parent of `(l, i)`, `l >= 1`.
#[inline]
pub fn parent(d: usize, l: usize, i: u64) -> u64 {
    if l == 1 {
        0
    } else {
        i / (d - 1) as u64
    }
}

/// Variance of the root value, `(d-1)/(d-2)`.
pub fn root_variance(d: usize) -> f64 {
    (d - 1) as f64 / (d - 2) as f64
}

/// Variance of a non-root increment, `d/(d-1)`.
pub fn increment_variance(d: usize) -> f64 {
    d as f64 / (d - 1) as f64
}

/// Tree Green function at distance `dist`: `((d-1)/(d-2)) (d-1)^{-dist}`.
pub fn tree_green(d: usize, dist: usize) -> f64 {
    root_variance(d) * libm::pow((d - 1) as f64, -(dist as f64))
}

/// Keyed increment `Y` at `(l, i)`.
#[inline]
pub fn increment(d: usize, seed: u64, l: usize, i: u64) -> f64 {
    let var = if l == 0 { root_variance(d) } else { increment_variance(d) };
    libm::sqrt(var) * keyed_normal(seed, tag::TREE_INCREMENT, l as u64, i)
}

/// Keyed uniform deciding the Bernoulli mark at `(l, i)`: the mark is open
/// with parameter `p` iff the uniform is at most `p`.
#[inline]
pub fn mark_uniform(seed: u64, l: usize, i: u64) -> f64 {
    keyed_uniform(seed, tag::TREE_MARK, l as u64, i)
}

#[inline]
fn child_value(d: usize, seed: u64, parent_value: f64, l: usize, i: u64) -> f64 {
    parent_value / (d - 1) as f64 + increment(d, seed, l, i)
}

fn children_sum(d: usize, seed: u64, value: f64, l: usize, i: u64) -> f64 {
    children(d, l, i).map(|c| child_value(d, seed, value, l + 1, c)).sum()
}

/// Coefficients of the exact conditional sprinkle sampler.
#[derive(Debug, Clone, Copy)]
struct PruneCoefficients {
    mean: f64,
    vertex_sd: f64,
    edge_sd: f64,
}

impl PruneCoefficients {
    /// The conditional covariance `(t^2/2) I - (t^4/4)(I - A/d)` has diagonal
    /// `a = t^2/2 - t^4/4` and neighbour entries `b = t^4/(4d)`. Writing the
    /// residual as `sqrt(a - b d) eps_x + sqrt(b) sum_{e ~ x} eta_e` with
    /// independent vertex and edge noises reproduces it exactly; this needs
    /// `a - b d = (t^2 - t^4)/2 >= 0`.
    fn new(d: usize, t: f64) -> Result<Self, TreeError> {
        if !(0.0..1.0).contains(&t) {
            return Err(TreeError::BadStrength(t));
        }
        let t2 = t * t;
        let a = t2 / 2.0 - t2 * t2 / 4.0;
        let b = t2 * t2 / (4.0 * d as f64);
        Ok(PruneCoefficients {
            mean: t2 / 2.0,
            vertex_sd: libm::sqrt((a - b * d as f64).max(0.0)),
            edge_sd: libm::sqrt(b),
        })
    }

    /// Sprinkle part at `(l, i)` given its value, its parent's value and the
    /// values of its children.
    #[allow(clippy::too_many_arguments)]
    fn sprinkle(&self, d: usize, seed: u64, l: usize, i: u64, value: f64, parent_value: f64, child_values: &[f64]) -> f64 {
        let mut nb = child_values.iter().sum::<f64>();
        let mut edges: f64 = children(d, l, i)
            .map(|c| keyed_normal(seed, tag::PRUNE_EDGE, (l + 1) as u64, c))
            .sum();
        if l > 0 {
            nb += parent_value;
            edges += keyed_normal(seed, tag::PRUNE_EDGE, l as u64, i);
        }
        let mean = self.mean * (value - nb / d as f64);
        mean + self.vertex_sd * keyed_normal(seed, tag::PRUNE_VERTEX, l as u64, i) + self.edge_sd * edges
    }
}

/// Flat level-order numbering of `B(o, depth)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeLayout {
    pub d: usize,
    pub depth: usize,
    offsets: Vec<usize>,
}

impl TreeLayout {
    pub fn new(d: usize, depth: usize) -> Self {
        let mut offsets = Vec::with_capacity(depth + 2);
        let mut total = 0;
        for l in 0..=depth {
            offsets.push(total);
            total += level_size(d, l);
        }
        offsets.push(total);
        TreeLayout { d, depth, offsets }
    }
    pub fn len(&self) -> usize {
        self.offsets[self.depth + 1]
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Number of vertices within distance `r` of the root.
    pub fn ball_len(&self, r: usize) -> usize {
        self.offsets[r.min(self.depth) + 1]
    }
    #[inline]
    pub fn index(&self, l: usize, i: u64) -> usize {
        self.offsets[l] + i as usize
    }
    pub fn level_range(&self, l: usize) -> core::ops::Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }
    /// `(level, index)` of the flat position `v`.
    pub fn coords(&self, v: usize) -> (usize, u64) {
        let l = self.offsets.partition_point(|&o| o <= v) - 1;
        (l, (v - self.offsets[l]) as u64)
    }
    /// Flat position of the parent of `v`, `None` for the root.
    pub fn parent_of(&self, v: usize) -> Option<usize> {
        let (l, i) = self.coords(v);
        (l > 0).then(|| self.index(l - 1, parent(self.d, l, i)))
    }
    /// Flat positions of the children of `v` inside the layout.
    pub fn children_of(&self, v: usize) -> core::ops::Range<usize> {
        let (l, i) = self.coords(v);
        if l == self.depth {
            return 0..0;
        }
        let c = children(self.d, l, i);
        self.index(l + 1, c.start)..self.index(l + 1, c.end)
    }
    /// Graph distance between flat positions.
    pub fn distance(&self, mut a: usize, mut b: usize) -> usize {
        let mut dist = 0;
        while a != b {
            if a > b {
                a = self.parent_of(a).unwrap();
            } else {
                b = self.parent_of(b).unwrap();
            }
            dist += 1;
        }
        dist
    }
}

/// Materialised field on `B(o, depth)` in level order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSample {
    pub d: usize,
    pub depth: usize,
    pub seed: u64,
    pub layout: TreeLayout,
    pub phi: Vec<f64>,
    pub increments: Vec<f64>,
    /// Pruned values on `B(o, depth - 1)`, filled by [`prune_field`].
    pub phi1: Option<Vec<f64>>,
    pub phi2: Option<Vec<f64>>,
    pub prune_seed: Option<u64>,
}

impl TreeSample {
    pub fn len(&self) -> usize {
        self.phi.len()
    }
    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
    #[inline]
    pub fn index(&self, l: usize, i: u64) -> usize {
        self.layout.index(l, i)
    }
    pub fn value(&self, l: usize, i: u64) -> f64 {
        self.phi[self.index(l, i)]
    }
    pub fn coords(&self, v: usize) -> (usize, u64) {
        self.layout.coords(v)
    }
    pub fn parent_of(&self, v: usize) -> Option<usize> {
        self.layout.parent_of(v)
    }
    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.layout.distance(a, b)
    }
}

/// Exact field on the ball of radius `depth` around the root.
pub fn sample_tree(d: usize, depth: usize, seed: u64) -> Result<TreeSample, TreeError> {
    if d < 3 {
        return Err(TreeError::Degree(d));
    }
    let layout = TreeLayout::new(d, depth);
    let total = layout.len();
    let mut phi = vec![0.0; total];
    let mut increments = vec![0.0; total];
    increments[0] = increment(d, seed, 0, 0);
    phi[0] = increments[0];
    for l in 1..=depth {
        for i in 0..level_size(d, l) as u64 {
            let v = layout.index(l, i);
            let pv = phi[layout.index(l - 1, parent(d, l, i))];
            increments[v] = increment(d, seed, l, i);
            phi[v] = child_value(d, seed, pv, l, i);
        }
    }
    Ok(TreeSample { d, depth, seed, layout, phi, increments, phi1: None, phi2: None, prune_seed: None })
}

/// Root component with its members and per-level counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeComponent {
    pub members: Vec<(usize, u64)>,
    pub level_counts: Vec<u64>,
}

/// Last level on which membership can be decided inside the sample.
fn reported_levels(depth: usize, gamma: Threshold) -> usize {
    if gamma.is_finite() {
        depth.saturating_sub(1)
    } else {
        depth
    }
}

/// Root component of `{phi >= h, mark open, children sum >= gamma}`.
///
/// The children-sum test needs the next level, so with finite `gamma` the
/// component is reported on levels `0..depth` only.
pub fn robust_component(ts: &TreeSample, h: f64, p: f64, gamma: Threshold, mark_seed: u64) -> TreeComponent {
    let d = ts.d;
    let last = reported_levels(ts.depth, gamma);
    let robust = |l: usize, i: u64| -> bool {
        let v = ts.value(l, i);
        v >= h
            && mark_uniform(mark_seed, l, i) <= p
            && (!gamma.is_finite() || gamma.admits(children(d, l, i).map(|c| ts.value(l + 1, c)).sum()))
    };
    let mut members = Vec::new();
    let mut level_counts = vec![0u64; last + 1];
    if !robust(0, 0) {
        return TreeComponent { members, level_counts };
    }
    let mut front = vec![0u64];
    members.push((0, 0));
    level_counts[0] = 1;
    for l in 0..last {
        let mut next = Vec::new();
        for &i in &front {
            for c in children(d, l, i) {
                if robust(l + 1, c) {
                    next.push(c);
                    members.push((l + 1, c));
                }
            }
        }
        level_counts[l + 1] = next.len() as u64;
        if next.is_empty() {
            break;
        }
        front = next;
    }
    TreeComponent { members, level_counts }
}

/// Lazy level counts of the robust root component on levels `0..=last`.
pub fn robust_level_counts(d: usize, seed: u64, mark_seed: u64, h: f64, p: f64, gamma: Threshold, last: usize) -> Vec<u64> {
    let robust = |l: usize, i: u64, v: f64| -> bool {
        v >= h
            && mark_uniform(mark_seed, l, i) <= p
            && (!gamma.is_finite() || gamma.admits(children_sum(d, seed, v, l, i)))
    };
    let mut counts = vec![0u64; last + 1];
    let root = increment(d, seed, 0, 0);
    if !robust(0, 0, root) {
        return counts;
    }
    counts[0] = 1;
    let mut front = vec![(0u64, root)];
    let mut next = Vec::new();
    for l in 0..last {
        next.clear();
        for &(i, v) in &front {
            for c in children(d, l, i) {
                let cv = child_value(d, seed, v, l + 1, c);
                if robust(l + 1, c, cv) {
                    next.push((c, cv));
                }
            }
        }
        counts[l + 1] = next.len() as u64;
        if next.is_empty() {
            break;
        }
        core::mem::swap(&mut front, &mut next);
    }
    counts
}

/// Fills `phi2` with an exact draw of the sprinkle part given `phi` and sets
/// `phi1 = phi - phi2`, on `B(o, depth - 1)`.
pub fn prune_field(ts: &mut TreeSample, t: f64, seed: u64) -> Result<(), TreeError> {
    let coef = PruneCoefficients::new(ts.d, t)?;
    if ts.depth == 0 {
        return Err(TreeError::DepthMargin);
    }
    let d = ts.d;
    let inner = ts.layout.ball_len(ts.depth - 1);
    let mut phi1 = vec![0.0; inner];
    let mut phi2 = vec![0.0; inner];
    let mut kids = Vec::with_capacity(d);
    for v in 0..inner {
        let (l, i) = ts.coords(v);
        kids.clear();
        kids.extend(children(d, l, i).map(|c| ts.value(l + 1, c)));
        let pv = if l > 0 { ts.value(l - 1, parent(d, l, i)) } else { 0.0 };
        let s = coef.sprinkle(d, seed, l, i, ts.phi[v], pv, &kids);
        phi2[v] = s;
        phi1[v] = ts.phi[v] - s;
    }
    ts.phi1 = Some(phi1);
    ts.phi2 = Some(phi2);
    ts.prune_seed = Some(seed);
    Ok(())
}

/// Root component of `{phi >= h, phi1 >= h, mark open}` on `B(o, depth - 1)`.
pub fn pruned_component(ts: &TreeSample, h: f64, p: f64, mark_seed: u64) -> Result<TreeComponent, TreeError> {
    let phi1 = ts.phi1.as_ref().ok_or(TreeError::NotPruned)?;
    let d = ts.d;
    let last = ts.depth - 1;
    let open = |l: usize, i: u64| -> bool {
        let v = ts.index(l, i);
        ts.phi[v] >= h && phi1[v] >= h && mark_uniform(mark_seed, l, i) <= p
    };
    let mut members = Vec::new();
    let mut level_counts = vec![0u64; last + 1];
    if !open(0, 0) {
        return Ok(TreeComponent { members, level_counts });
    }
    members.push((0, 0));
    level_counts[0] = 1;
    let mut front = vec![0u64];
    for l in 0..last {
        let mut next = Vec::new();
        for &i in &front {
            for c in children(d, l, i) {
                if open(l + 1, c) {
                    next.push(c);
                    members.push((l + 1, c));
                }
            }
        }
        level_counts[l + 1] = next.len() as u64;
        if next.is_empty() {
            break;
        }
        front = next;
    }
    Ok(TreeComponent { members, level_counts })
}

/// Lazy level counts of the pruned root component on levels `0..=last`.
#[allow(clippy::too_many_arguments)]
pub fn pruned_level_counts(
    d: usize,
    seed: u64,
    mark_seed: u64,
    prune_seed: u64,
    h: f64,
    p: f64,
    t: f64,
    last: usize,
) -> Result<Vec<u64>, TreeError> {
    let coef = PruneCoefficients::new(d, t)?;
    let mut kids = Vec::with_capacity(d);
    let mut open = |l: usize, i: u64, v: f64, pv: f64| -> bool {
        if v < h || mark_uniform(mark_seed, l, i) > p {
            return false;
        }
        kids.clear();
        kids.extend(children(d, l, i).map(|c| child_value(d, seed, v, l + 1, c)));
        v - coef.sprinkle(d, prune_seed, l, i, v, pv, &kids) >= h
    };
    let mut counts = vec![0u64; last + 1];
    let root = increment(d, seed, 0, 0);
    if !open(0, 0, root, 0.0) {
        return Ok(counts);
    }
    counts[0] = 1;
    let mut front = vec![(0u64, root)];
    let mut next = Vec::new();
    for l in 0..last {
        next.clear();
        for &(i, v) in &front {
            for c in children(d, l, i) {
                let cv = child_value(d, seed, v, l + 1, c);
                if open(l + 1, c, cv, v) {
                    next.push((c, cv));
                }
            }
        }
        counts[l + 1] = next.len() as u64;
        if next.is_empty() {
            break;
        }
        core::mem::swap(&mut front, &mut next);
    }
    Ok(counts)
}

/// Monte Carlo survival estimate of a root component.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaEstimate {
    pub h: f64,
    pub p: f64,
    pub gamma: Threshold,
    pub t: Option<f64>,
    pub depth: usize,
    pub replicas: usize,
    pub survival_fraction: f64,
    /// 95% normal-approximation half width.
    pub ci_halfwidth: f64,
    /// Mean component size on each level `0..depth`.
    pub mean_front: Vec<f64>,
}

/// Per-replica field and mark seeds used by the survival estimators.
#[inline]
pub fn replica_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, tag::ETA, r as u64)
}

/// Assembles an [`EtaEstimate`] from per-level count sums.
#[allow(clippy::too_many_arguments)]
pub fn eta_from_counts(
    h: f64,
    p: f64,
    gamma: Threshold,
    t: Option<f64>,
    depth: usize,
    replicas: usize,
    survivors: u64,
    front_sums: &[u64],
) -> EtaEstimate {
    let r = replicas as f64;
    let frac = survivors as f64 / r;
    EtaEstimate {
        h,
        p,
        gamma,
        t,
        depth,
        replicas,
        survival_fraction: frac,
        ci_halfwidth: 1.96 * libm::sqrt(frac * (1.0 - frac) / r),
        mean_front: front_sums.iter().map(|&s| s as f64 / r).collect(),
    }
}

/// Fraction of replicas whose robust root component reaches level `depth - 1`.
pub fn estimate_eta(d: usize, h: f64, p: f64, gamma: Threshold, depth: usize, replicas: usize, seed: u64) -> EtaEstimate {
    let last = depth.saturating_sub(1);
    let mut sums = vec![0u64; last + 1];
    let mut survivors = 0u64;
    for r in 0..replicas {
        let s = replica_seed(seed, r);
        let counts = robust_level_counts(d, s, s, h, p, gamma, last);
        survivors += u64::from(counts[last] > 0);
        sums.iter_mut().zip(&counts).for_each(|(a, c)| *a += c);
    }
    eta_from_counts(h, p, gamma, None, depth, replicas, survivors, &sums)
}

/// As [`estimate_eta`] for the pruned component at sprinkle strength `t`.
pub fn estimate_eta_pruned(d: usize, h: f64, p: f64, t: f64, depth: usize, replicas: usize, seed: u64) -> Result<EtaEstimate, TreeError> {
    let last = depth.saturating_sub(1);
    let mut sums = vec![0u64; last + 1];
    let mut survivors = 0u64;
    for r in 0..replicas {
        let s = replica_seed(seed, r);
        let counts = pruned_level_counts(d, s, s, s, h, p, t, last)?;
        survivors += u64::from(counts[last] > 0);
        sums.iter_mut().zip(&counts).for_each(|(a, c)| *a += c);
    }
    Ok(eta_from_counts(h, p, Threshold::NegInfinity, Some(t), depth, replicas, survivors, &sums))
}
