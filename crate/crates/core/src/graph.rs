//! Finite regular graphs, their midpoint subdivision, and structural diagnostics.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng;

/// Default number of whole-pairing resamples before giving up.
pub const DEFAULT_MAX_RETRIES: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("parity: n*d = {n}*{d} is odd")]
    Parity { n: usize, d: usize },
    #[error("degree {d} is below 3")]
    DegreeTooSmall { d: usize },
    #[error("need at least d+1 = {need} vertices, got {n}")]
    TooFewVertices { n: usize, need: usize },
    #[error("no simple connected pairing after {attempts} attempts")]
    RetryLimit { attempts: u32 },
    #[error("vertex {v} out of range for n = {n}")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("edge list is not simple: {u}-{v}")]
    NotSimple { u: usize, v: usize },
    #[error("vertex {v} has degree {got}, expected {d}")]
    NotRegular { v: usize, got: usize, d: usize },
    #[error("graph is disconnected")]
    Disconnected,
}

/// Read access shared by every graph-like type in the crate.
pub trait Topology {
    fn vertex_count(&self) -> usize;
    fn neighbors(&self, v: usize) -> &[u32];
    fn degree_of(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    ConfigurationModel,
    Explicit,
}

/// Simple connected `d`-regular graph with sorted, flat adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    d: usize,
    adj: Vec<u32>,
    seed: u64,
    method: Construction,
}

impl Topology for Graph {
    #[inline]
    fn vertex_count(&self) -> usize {
        self.n
    }
    #[inline]
    fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v * self.d..(v + 1) * self.d]
    }
    #[inline]
    fn degree_of(&self, _v: usize) -> usize {
        self.d
    }
}

impl Graph {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn degree(&self) -> usize {
        self.d
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn method(&self) -> Construction {
        self.method
    }
    pub fn edge_count(&self) -> usize {
        self.n * self.d / 2
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Builds a graph from an explicit edge list, checking simplicity,
    /// regularity and connectivity.
    pub fn from_edges(
        n: usize,
        d: usize,
        seed: u64,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        check_params(n, d)?;
        let mut lists: Vec<Vec<u32>> = vec![Vec::with_capacity(d); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { v: w, n });
                }
            }
            if u == v {
                return Err(GraphError::NotSimple { u, v });
            }
            lists[u].push(v as u32);
            lists[v].push(u as u32);
        }
        let mut adj = Vec::with_capacity(n * d);
        for (v, list) in lists.iter_mut().enumerate() {
            if list.len() != d {
                return Err(GraphError::NotRegular { v, got: list.len(), d });
            }
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::NotSimple { u: v, v: w[0] as usize });
            }
            adj.extend_from_slice(list);
        }
        let g = Graph { n, d, adj, seed, method: Construction::Explicit };
        if !is_connected(&g) {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }
}

fn check_params(n: usize, d: usize) -> Result<(), GraphError> {
    if d < 3 {
        return Err(GraphError::DegreeTooSmall { d });
    }
    if (n * d) % 2 == 1 {
        return Err(GraphError::Parity { n, d });
    }
    if n < d + 1 {
        return Err(GraphError::TooFewVertices { n, need: d + 1 });
    }
    Ok(())
}

/// Random simple connected `d`-regular graph on `n` vertices from the
/// configuration model, with the default retry cap.
pub fn build_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    build_random_regular_with_retries(n, d, seed, DEFAULT_MAX_RETRIES)
}

/// As [`build_random_regular`] with an explicit cap on whole-pairing resamples.
pub fn build_random_regular_with_retries(
    n: usize,
    d: usize,
    seed: u64,
    max_retries: u32,
) -> Result<Graph, GraphError> {
    check_params(n, d)?;
    let mut rng = rng::tagged_rng(seed, rng::tag::GRAPH);
    let mut points: Vec<u32> = (0..n * d).map(|p| (p / d) as u32).collect();
    let mut adj = vec![0u32; n * d];
    let mut fill = vec![0usize; n];
    'attempt: for _ in 0..max_retries {
        points.shuffle(&mut rng);
        fill.iter_mut().for_each(|f| *f = 0);
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0] as usize, pair[1] as usize);
            if u == v {
                continue 'attempt;
            }
            adj[u * d + fill[u]] = v as u32;
            fill[u] += 1;
            adj[v * d + fill[v]] = u as u32;
            fill[v] += 1;
        }
        for v in 0..n {
            let list = &mut adj[v * d..(v + 1) * d];
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                continue 'attempt;
            }
        }
        let g = Graph {
            n,
            d,
            adj: adj.clone(),
            seed,
            method: Construction::ConfigurationModel,
        };
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(GraphError::RetryLimit { attempts: max_retries })
}

/// Graph with arbitrary degrees, used for trees and test fixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    lists: Vec<Vec<u32>>,
}

impl AdjacencyGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            lists[u].push(v as u32);
            lists[v].push(u as u32);
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        AdjacencyGraph { lists }
    }
}

impl Topology for AdjacencyGraph {
    fn vertex_count(&self) -> usize {
        self.lists.len()
    }
    fn neighbors(&self, v: usize) -> &[u32] {
        &self.lists[v]
    }
}

pub fn is_connected<T: Topology + ?Sized>(g: &T) -> bool {
    let n = g.vertex_count();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            let v = v as usize;
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Reusable BFS workspace for repeated ball queries on one graph.
pub struct BallScanner {
    dist: Vec<u32>,
    touched: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BallScanner {
    pub fn new(n: usize) -> Self {
        BallScanner { dist: vec![u32::MAX; n], touched: Vec::new(), queue: VecDeque::new() }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v] = u32::MAX;
        }
        self.touched.clear();
        self.queue.clear();
    }

    /// Vertices of `B(x, r)` in BFS order (ties broken by vertex id).
    pub fn ball<T: Topology + ?Sized>(&mut self, g: &T, x: usize, r: usize) -> Vec<usize> {
        self.reset();
        self.dist[x] = 0;
        self.touched.push(x);
        self.queue.push_back(x);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u];
            if du as usize == r {
                continue;
            }
            for &v in g.neighbors(u) {
                let v = v as usize;
                if self.dist[v] == u32::MAX {
                    self.dist[v] = du + 1;
                    self.touched.push(v);
                    self.queue.push_back(v);
                }
            }
        }
        self.touched.clone()
    }

    /// `(vertices, induced edges)` of `B(x, r)`.
    pub fn ball_counts<T: Topology + ?Sized>(&mut self, g: &T, x: usize, r: usize) -> (usize, usize) {
        let ball = self.ball(g, x, r);
        let mut twice = 0;
        for &u in &ball {
            twice += g.neighbors(u).iter().filter(|&&v| self.dist[v as usize] != u32::MAX).count();
        }
        (ball.len(), twice / 2)
    }

    /// Distance from the last ball centre, if within the last radius.
    pub fn distance(&self, v: usize) -> Option<usize> {
        let d = self.dist[v];
        (d != u32::MAX).then_some(d as usize)
    }
}

/// Whether `B(x, r)` contains no cycle.
pub fn is_treelike<T: Topology + ?Sized>(g: &T, x: usize, r: usize) -> bool {
    let (v, e) = BallScanner::new(g.vertex_count()).ball_counts(g, x, r);
    e + 1 == v
}

/// `|B(o, r)|` in the infinite `d`-regular tree.
pub fn tree_ball_size(d: usize, r: usize) -> usize {
    if r == 0 {
        return 1;
    }
    let mut total = 1;
    let mut sphere = d;
    for _ in 0..r {
        total += sphere;
        sphere *= d - 1;
    }
    total
}

/// Outer vertex boundary of `set`, sorted.
pub fn vertex_boundary<T: Topology + ?Sized>(g: &T, set: &[usize]) -> Vec<usize> {
    let n = g.vertex_count();
    let mut inside = vec![false; n];
    for &v in set {
        inside[v] = true;
    }
    let mut hit = vec![false; n];
    for &v in set {
        for &w in g.neighbors(v) {
            let w = w as usize;
            if !inside[w] {
                hit[w] = true;
            }
        }
    }
    (0..n).filter(|&v| hit[v]).collect()
}

/// Lazy walk as the symmetric operator `D^{1/2} P D^{-1/2}`.
fn sym_lazy_apply<T: Topology + ?Sized>(g: &T, isd: &[f64], x: &[f64], out: &mut [f64]) {
    for (u, o) in out.iter_mut().enumerate() {
        let s: f64 = g.neighbors(u).iter().map(|&v| x[v as usize] * isd[v as usize]).sum();
        *o = 0.5 * x[u] + 0.5 * isd[u] * s;
    }
}

/// Largest eigenvalue of the symmetric tridiagonal matrix `(alpha, beta)` by
/// Sturm-count bisection.
fn tridiag_max_eigen(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // number of eigenvalues strictly greater than s
    let count_above = |s: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..m {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            q = alpha[i] - s - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -1e-300;
            }
            if q > 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_above(mid) >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Iteration cap for the Lanczos gap computation.
pub const LANCZOS_MAX_ITER: usize = 400;

/// `1 - mu_2`, where `mu_2` is the second largest eigenvalue of the lazy
/// random walk `P = (I + D^{-1} A) / 2`. Values lie in `[0, 1]`.
pub fn spectral_gap<T: Topology + ?Sized>(g: &T) -> f64 {
    let n = g.vertex_count();
    if n <= 1 {
        return 1.0;
    }
    let sd: Vec<f64> = (0..n).map(|v| libm::sqrt(g.degree_of(v) as f64)).collect();
    let isd: Vec<f64> = sd.iter().map(|s| 1.0 / s).collect();
    let norm = libm::sqrt(sd.iter().map(|s| s * s).sum::<f64>());
    let top: Vec<f64> = sd.iter().map(|s| s / norm).collect();

    let project = |x: &mut [f64], q: &[f64]| {
        let c: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    };

    let mut r = rng::tagged_rng(0x01A2_C705, rng::tag::LANCZOS);
    let mut v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
    project(&mut v, &top);
    let nv = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
    v.iter_mut().for_each(|a| *a /= nv);

    let max_iter = LANCZOS_MAX_ITER.min(n - 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alpha = Vec::with_capacity(max_iter);
    let mut beta: Vec<f64> = Vec::with_capacity(max_iter);
    let mut w = vec![0.0; n];
    let mut history: Vec<f64> = Vec::new();
    basis.push(v);
    loop {
        let j = basis.len() - 1;
        sym_lazy_apply(g, &isd, &basis[j], &mut w);
        let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        // full reorthogonalisation, twice for stability
        for _ in 0..2 {
            project(&mut w, &top);
            for q in &basis {
                project(&mut w, q);
            }
        }
        let b = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
        let theta = tridiag_max_eigen(&alpha, &beta);
        history.push(theta);
        let k = history.len();
        let stalled = k > 30 && (history[k - 1] - history[k - 11]).abs() < 1e-13;
        if b < 1e-12 || basis.len() >= max_iter || stalled {
            return (1.0 - theta).clamp(0.0, 1.0);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// Structural diagnostics for a graph against the standing assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub alpha_radius: usize,
    pub treelike_fraction: f64,
    pub one_cycle_fraction: f64,
    pub spectral_gap: f64,
    pub min_expansion_sampled: f64,
}

/// `floor(alpha * log_{d-1} N)`.
pub fn alpha_radius(n: usize, d: usize, alpha: f64) -> usize {
    libm::floor(alpha * libm::log(n as f64) / libm::log((d - 1) as f64)).max(0.0) as usize
}

/// Fractions of vertices whose radius-`r` ball has no cycle, and at most one.
pub fn treelike_fractions<T: Topology + ?Sized>(g: &T, r: usize) -> (f64, f64) {
    let n = g.vertex_count();
    let mut scan = BallScanner::new(n);
    let (mut tree, mut one) = (0usize, 0usize);
    for x in 0..n {
        let (v, e) = scan.ball_counts(g, x, r);
        if e + 1 == v {
            tree += 1;
        }
        if e <= v {
            one += 1;
        }
    }
    (tree as f64 / n as f64, one as f64 / n as f64)
}

/// Smallest `|boundary(A)| / |A|` over sampled sets with `|A| <= N/2`:
/// truncated BFS balls around random centres and uniform random subsets.
pub fn sampled_min_expansion<T: Topology + ?Sized>(g: &T, samples: usize, seed: u64) -> f64 {
    let n = g.vertex_count();
    let half = n / 2;
    if half == 0 {
        return f64::INFINITY;
    }
    let mut r = rng::tagged_rng(seed, rng::tag::EXPANSION);
    let mut scan = BallScanner::new(n);
    let mut all: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    for s in 0..samples {
        let size = r.random_range(1..=half);
        let set: Vec<usize> = if s % 2 == 0 {
            let x = r.random_range(0..n);
            let mut ball = scan.ball(g, x, n);
            ball.truncate(size);
            ball
        } else {
            all.shuffle(&mut r);
            all[..size].to_vec()
        };
        let ratio = vertex_boundary(g, &set).len() as f64 / set.len() as f64;
        best = best.min(ratio);
    }
    best
}

pub fn assumption_report(g: &Graph, alpha: f64, expansion_samples: usize, seed: u64) -> AssumptionReport {
    let alpha_radius = alpha_radius(g.n(), g.degree(), alpha);
    let (treelike_fraction, one_cycle_fraction) = treelike_fractions(g, alpha_radius);
    AssumptionReport {
        alpha_radius,
        treelike_fraction,
        one_cycle_fraction,
        spectral_gap: spectral_gap(g),
        min_expansion_sampled: sampled_min_expansion(g, expansion_samples, seed),
    }
}

/// Largest `r` such that the `2r`-treelike fraction is at least
/// `1 - N^{-c}`, or `None` if even `r = 1` fails.
pub fn treelike_radius_scan<T: Topology + ?Sized>(g: &T, c: f64, r_cap: usize) -> Option<usize> {
    let n = g.vertex_count() as f64;
    let need = 1.0 - libm::pow(n, -c);
    let mut best = None;
    for r in 1..=r_cap {
        let (frac, _) = treelike_fractions(g, 2 * r);
        if frac >= need {
            best = Some(r);
        } else {
            break;
        }
    }
    best
}

/// The subdivision of a regular graph with one extra vertex per edge.
///
/// Original vertices keep ids `0..N`; the midpoint of the `e`-th edge in
/// lexicographic order has id `N + e`.
#[derive(Debug, Clone)]
pub struct MidpointGraph<'g> {
    base: &'g Graph,
    ends: Vec<[u32; 2]>,
    incident: Vec<u32>,
}

impl<'g> MidpointGraph<'g> {
    pub fn new(base: &'g Graph) -> Self {
        let (n, d) = (base.n(), base.degree());
        let mut ends = Vec::with_capacity(base.edge_count());
        let mut incident = vec![0u32; n * d];
        for (u, v) in base.edges() {
            let e = ends.len() as u32;
            ends.push([u as u32, v as u32]);
            let pu = base.neighbors(u).binary_search(&(v as u32)).unwrap();
            let pv = base.neighbors(v).binary_search(&(u as u32)).unwrap();
            incident[u * d + pu] = e;
            incident[v * d + pv] = e;
        }
        MidpointGraph { base, ends, incident }
    }

    pub fn base(&self) -> &'g Graph {
        self.base
    }
    pub fn n_original(&self) -> usize {
        self.base.n()
    }
    pub fn n_total(&self) -> usize {
        self.base.n() + self.ends.len()
    }
    pub fn edge_count(&self) -> usize {
        self.ends.len()
    }
    pub fn is_midpoint(&self, x: usize) -> bool {
        x >= self.base.n()
    }

    /// Endpoints of the edge with index `e`.
    pub fn endpoints(&self, e: usize) -> [usize; 2] {
        let [a, b] = self.ends[e];
        [a as usize, b as usize]
    }

    /// Edge indices at an original vertex, ordered by neighbour id.
    pub fn incident_edges(&self, v: usize) -> &[u32] {
        let d = self.base.degree();
        &self.incident[v * d..(v + 1) * d]
    }

    /// Id of the midpoint on edge `{u, v}`.
    pub fn midpoint(&self, u: usize, v: usize) -> Option<usize> {
        let pos = self.base.neighbors(u).binary_search(&(v as u32)).ok()?;
        Some(self.base.n() + self.incident_edges(u)[pos] as usize)
    }

    /// Stationary weight: `d` on original vertices, `2` on midpoints.
    pub fn weight(&self, x: usize) -> f64 {
        if self.is_midpoint(x) {
            2.0
        } else {
            self.base.degree() as f64
        }
    }

    /// `+1` on original vertices, `-1` on midpoints.
    pub fn parity(&self, x: usize) -> f64 {
        if self.is_midpoint(x) {
            -1.0
        } else {
            1.0
        }
    }

    /// Neighbours of `x` in the subdivided graph.
    pub fn neighbors_of(&self, x: usize) -> Vec<usize> {
        let n = self.base.n();
        if x >= n {
            self.endpoints(x - n).to_vec()
        } else {
            self.incident_edges(x).iter().map(|&e| n + e as usize).collect()
        }
    }

    /// One step of the simple random walk on the subdivided graph:
    /// `out = Q f`.
    pub fn apply_walk(&self, f: &[f64], out: &mut [f64]) {
        let n = self.base.n();
        let inv_d = 1.0 / self.base.degree() as f64;
        for (v, o) in out[..n].iter_mut().enumerate() {
            let s: f64 = self.incident_edges(v).iter().map(|&e| f[n + e as usize]).sum();
            *o = s * inv_d;
        }
        for (e, [a, b]) in self.ends.iter().enumerate() {
            out[n + e] = 0.5 * (f[*a as usize] + f[*b as usize]);
        }
    }
}
