//! Level sets of fields on a graph, their connected components, and the
//! sprinkling construction that glues mesoscopic clusters into a giant one.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{build_random_regular, spectral_gap, BallScanner, Graph, GraphError, MidpointGraph, Topology};
use crate::rng::{derive_seed, tag};
use crate::sampler::{
    bar_psi2_from, default_k_max, sample_decomposition, sample_zbar, split_sprinkle, Field, SamplerError, SplitMode,
};
use crate::stats::{normal_quantile, normal_sf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PercolationError {
    #[error("field has {got} entries, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("p = {0} outside (1/2, 1]")]
    P(f64),
    #[error("mesoscopic exponent {0} outside (0, 1)")]
    Exponent(f64),
    #[error("levels must satisfy h < h' (got {h} and {h_prime})")]
    Levels { h: f64, h_prime: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Indicator of `{x : f(x) >= h}`. Infinite levels are allowed.
pub fn level_set(values: &[f64], h: f64) -> Vec<bool> {
    values.iter().map(|&v| v >= h).collect()
}

/// Disjoint sets with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let gp = self.parent[self.parent[x] as usize];
            self.parent[x] = gp;
            x = gp as usize;
        }
        x
    }

    /// Merges the classes of `a` and `b`; returns whether they were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn class_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// Marker for vertices outside the set in [`ComponentStats::component`].
pub const OUTSIDE: u32 = u32::MAX;

/// Connected components of an induced subgraph.
///
/// Component ids are assigned in order of the smallest member, so the
/// labelling is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    /// Level that produced the set, when there is one.
    pub h: Option<f64>,
    /// Component id per vertex, [`OUTSIDE`] if excluded.
    pub component: Vec<u32>,
    /// Size of each component, indexed by id.
    pub size_by_id: Vec<usize>,
    /// Sizes in descending order.
    pub sizes: Vec<usize>,
}

impl ComponentStats {
    pub fn c_max(&self) -> usize {
        self.sizes.first().copied().unwrap_or(0)
    }

    pub fn c_sec(&self) -> usize {
        self.sizes.get(1).copied().unwrap_or(0)
    }

    /// Number of vertices in the set.
    pub fn set_size(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Number of vertices in components with at least `m` vertices.
    pub fn mesoscopic_count(&self, m: usize) -> usize {
        self.sizes.iter().take_while(|&&s| s >= m).sum()
    }

    /// Id of the largest component (smallest id among ties).
    pub fn largest_id(&self) -> Option<u32> {
        let best = self.c_max();
        self.size_by_id.iter().position(|&s| s == best && s > 0).map(|i| i as u32)
    }

    /// Size of the component containing `x`, zero outside the set.
    pub fn size_of(&self, x: usize) -> usize {
        match self.component[x] {
            OUTSIDE => 0,
            c => self.size_by_id[c as usize],
        }
    }

    /// Members of every component, indexed by id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.size_by_id.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (x, &c) in self.component.iter().enumerate() {
            if c != OUTSIDE {
                out[c as usize].push(x);
            }
        }
        out
    }

    /// Fraction of vertices `x` whose component lies inside `B(x, r/2)`.
    /// Vertices outside the set have an empty component and count as small.
    pub fn small_fraction<T: Topology + ?Sized>(&self, g: &T, r: usize) -> f64 {
        let n = self.component.len();
        if n == 0 {
            return 1.0;
        }
        let half = r / 2;
        let cap = ball_size_bound(g, half);
        let mut scan = BallScanner::new(n);
        let mut small = 0usize;
        for (c, members) in self.members().into_iter().enumerate() {
            if self.size_by_id[c] > cap {
                continue;
            }
            for &x in &members {
                scan.ball(g, x, half);
                if members.iter().all(|&y| scan.distance(y).is_some()) {
                    small += 1;
                }
            }
        }
        small += self.component.iter().filter(|&&c| c == OUTSIDE).count();
        small as f64 / n as f64
    }
}

fn ball_size_bound<T: Topology + ?Sized>(g: &T, r: usize) -> usize {
    let dmax = (0..g.vertex_count()).map(|v| g.degree_of(v)).max().unwrap_or(0);
    let (mut total, mut shell) = (1usize, 1usize);
    for k in 0..r {
        shell = shell.saturating_mul(if k == 0 { dmax } else { dmax.saturating_sub(1) });
        total = total.saturating_add(shell);
    }
    total
}

/// Exact components of the subgraph induced by `mask`.
pub fn components<T: Topology + ?Sized>(g: &T, mask: &[bool]) -> ComponentStats {
    let n = g.vertex_count();
    let mut uf = UnionFind::new(n);
    for u in 0..n {
        if !mask[u] {
            continue;
        }
        for &v in g.neighbors(u) {
            let v = v as usize;
            if v > u && mask[v] {
                uf.union(u, v);
            }
        }
    }
    let mut id_of_root = vec![OUTSIDE; n];
    let mut component = vec![OUTSIDE; n];
    let mut size_by_id = Vec::new();
    for x in 0..n {
        if !mask[x] {
            continue;
        }
        let r = uf.find(x);
        if id_of_root[r] == OUTSIDE {
            id_of_root[r] = size_by_id.len() as u32;
            size_by_id.push(0);
        }
        let c = id_of_root[r];
        component[x] = c;
        size_by_id[c as usize] += 1;
    }
    let mut sizes = size_by_id.clone();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    ComponentStats { h: None, component, size_by_id, sizes }
}

/// Components of `{values >= h}`.
pub fn level_components<T: Topology + ?Sized>(g: &T, values: &[f64], h: f64) -> ComponentStats {
    let mut stats = components(g, &level_set(values, h));
    stats.h = Some(h);
    stats
}

/// Fraction of vertices whose level-`h` component stays inside `B(x, r/2)`.
pub fn small_component_fraction<T: Topology + ?Sized>(g: &T, psi: &Field, h: f64, r: usize) -> f64 {
    level_components(g, &psi.values, h).small_fraction(g, r)
}

/// Seeds of one graph experiment, all derived from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub graph: u64,
    pub field: u64,
    pub split: u64,
    pub sprinkle: u64,
}

impl RunSeeds {
    pub fn from_master(seed: u64) -> Self {
        RunSeeds {
            graph: derive_seed(seed, tag::GRAPH, 0),
            field: derive_seed(seed, tag::FIELD, 0),
            split: derive_seed(seed, tag::SPLIT, 0),
            sprinkle: derive_seed(seed, tag::SPRINKLE, 0),
        }
    }
}

/// Outcome of one level-set sample on a fresh random regular graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GiantRun {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub k_max: usize,
    pub stats: ComponentStats,
}

impl GiantRun {
    pub fn c_max_fraction(&self) -> f64 {
        self.stats.c_max() as f64 / self.n as f64
    }
    pub fn c_sec_fraction(&self) -> f64 {
        self.stats.c_sec() as f64 / self.n as f64
    }
}

/// Samples a graph and a zero-average field on it, then the components of
/// the level set at `h`. With `k_max = None` the truncation is taken from
/// the measured spectral gap.
pub fn giant_experiment(n: usize, d: usize, h: f64, seed: u64, k_max: Option<usize>) -> Result<GiantRun, PercolationError> {
    let seeds = RunSeeds::from_master(seed);
    let g = build_random_regular(n, d, seeds.graph)?;
    let k_max = k_max.unwrap_or_else(|| default_k_max(spectral_gap(&g)));
    let mg = MidpointGraph::new(&g);
    let (psi, _) = sample_decomposition(&mg, k_max, seeds.field);
    let stats = level_components(&g, &psi.values, h);
    Ok(GiantRun { seed, n, d, h, k_max, stats })
}

/// Floors of the reduced graph: `Psi^1 >= K` and `zbar >= L`, where
/// `P(zbar >= L) = p` for `zbar ~ N(0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedGraphParams {
    pub k: f64,
    pub l: f64,
    pub p: f64,
    pub t: f64,
}

impl ReducedGraphParams {
    pub fn from_p(p: f64, k: f64, t: f64) -> Result<Self, PercolationError> {
        if !(p > 0.5 && p <= 1.0) {
            return Err(PercolationError::P(p));
        }
        Ok(ReducedGraphParams { k, l: floor_for_retention(p), p, t })
    }

    /// No floors at all.
    pub fn vacuous(t: f64) -> Self {
        ReducedGraphParams { k: f64::NEG_INFINITY, l: f64::NEG_INFINITY, p: 1.0, t }
    }

    /// Whether `x` survives in the reduced graph.
    pub fn keeps(&self, psi1: f64, zbar: f64) -> bool {
        psi1 >= self.k && zbar >= self.l
    }
}

/// `L` with `P(N(0, 1/2) >= L) = p`.
pub fn floor_for_retention(p: f64) -> f64 {
    if p >= 1.0 {
        f64::NEG_INFINITY
    } else {
        libm::sqrt(0.5) * normal_quantile(1.0 - p)
    }
}

/// Result of a mesoscopic scan.
#[derive(Debug, Clone, PartialEq)]
pub struct MesoscopicScan {
    /// Minimal component size `ceil(N^c)`.
    pub threshold: usize,
    /// Vertices in components of at least `threshold` vertices.
    pub count: usize,
    pub stats: ComponentStats,
}

fn check_len(got: usize, expected: usize) -> Result<(), PercolationError> {
    if got != expected {
        return Err(PercolationError::Dimension { got, expected });
    }
    Ok(())
}

/// Mesoscopic threshold `ceil(N^c)`.
pub fn mesoscopic_threshold(n: usize, c: f64) -> usize {
    libm::ceil(libm::pow(n as f64, c)).max(1.0) as usize
}

/// Counts vertices in components of size at least `N^c` of
/// `{Psi^1 >= h} ∩ {Psi >= h}` inside the reduced graph.
pub fn mesoscopic_scan<T: Topology + ?Sized>(
    g: &T,
    psi1: &Field,
    psi: &Field,
    zbar: &[f64],
    rgp: &ReducedGraphParams,
    h: f64,
    c: f64,
) -> Result<MesoscopicScan, PercolationError> {
    let n = g.vertex_count();
    check_len(psi1.len(), n)?;
    check_len(psi.len(), n)?;
    check_len(zbar.len(), n)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(PercolationError::Exponent(c));
    }
    let mask: Vec<bool> = (0..n)
        .map(|x| psi1.values[x] >= h && psi.values[x] >= h && rgp.keeps(psi1.values[x], zbar[x]))
        .collect();
    let stats = components(g, &mask);
    let threshold = mesoscopic_threshold(n, c);
    Ok(MesoscopicScan { threshold, count: stats.mesoscopic_count(threshold), stats })
}

/// `(#{zbar < L}, #{Psi^1 < K})`.
pub fn bad_set_counts(psi1: &[f64], zbar: &[f64], k: f64, l: f64) -> (usize, usize) {
    let b1 = zbar.iter().filter(|&&z| z < l).count();
    let b2 = psi1.iter().filter(|&&v| v < k).count();
    (b1, b2)
}

/// `c_1 ln(p lambda (1 - 2 delta'))`, which must land in `(0, 1)`.
pub fn mesoscopic_exponent(c1: f64, p: f64, lambda: f64, delta_prime: f64) -> Result<f64, PercolationError> {
    let c = c1 * libm::log(p * lambda * (1.0 - 2.0 * delta_prime));
    if c > 0.0 && c < 1.0 {
        Ok(c)
    } else {
        Err(PercolationError::Exponent(c))
    }
}

/// Both sides of the sprinkle-strength requirement
/// `P(zbar >= (h + 1 - K) / t) >= N^{-c beta delta eta / 8}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprinkleStrengthCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl SprinkleStrengthCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sprinkle_strength_check(h: f64, k: f64, t: f64, c: f64, beta: f64, delta: f64, eta: f64, n: usize) -> SprinkleStrengthCheck {
    let lhs = if t > 0.0 { normal_sf((h + 1.0 - k) / t / libm::sqrt(0.5)) } else { 0.0 };
    let rhs = libm::pow(n as f64, -c * beta * delta * eta / 8.0);
    SprinkleStrengthCheck { lhs, rhs }
}

/// Default sprinkle strength `1 / ln N`.
pub fn default_sprinkle_strength(n: usize) -> f64 {
    1.0 / libm::log(n as f64)
}

/// Inputs of one sprinkling run that do not depend on the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprinkleConfig {
    pub h: f64,
    pub h_prime: f64,
    pub p: f64,
    pub t: f64,
    /// Floor cap; the floor used is `min(h, k0)`.
    pub k0: f64,
    pub delta: f64,
    /// Mesoscopic exponent `c_{h'}`.
    pub c_meso: f64,
    /// Reference survival probability `eta(h', p)`.
    pub eta_ref: f64,
    pub k_max: usize,
}

/// Everything measured in one sprinkling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SprinkleRecord {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub h_prime: f64,
    pub p: f64,
    pub t: f64,
    pub k: f64,
    pub l: f64,
    /// Largest and second largest components of `{Psi^1 + bar Psi^2 >= h}`.
    pub c_max: usize,
    pub c_sec: usize,
    pub meso_threshold: usize,
    /// Vertices in the fixed mesoscopic components.
    pub meso_count: usize,
    pub meso_components: usize,
    /// Size of the component of the sprinkled level set holding the most
    /// fixed mesoscopic vertices.
    pub merged_size: usize,
    /// Fixed mesoscopic vertices inside that component.
    pub merged_meso_mass: usize,
    pub merged: bool,
    /// `|N^{-1} sum zbar|`.
    pub centering: f64,
    pub eps: f64,
    pub eta_ref: f64,
    pub bad_zbar: usize,
    pub bad_floor: usize,
}

impl SprinkleRecord {
    pub fn centering_ok(&self) -> bool {
        self.centering < self.eps
    }
}

/// One run of the sprinkling construction on a given graph.
///
/// `Psi^1` comes from the decomposition sampler split at strength `t`, and
/// `zbar` is an independent copy of the sprinkle noise. The fixed clusters
/// are the components of size at least `N^{c_meso}` of `{Psi^1 >= h'}` in
/// the reduced graph. They merge when a single component of
/// `{Psi^1 + t (zbar - mean zbar) >= h}` holds at least half of their
/// vertices and has at least `(1 - 2 delta) eta_ref N` vertices.
pub fn sprinkling_run(g: &Graph, cfg: &SprinkleConfig, seed: u64) -> Result<SprinkleRecord, PercolationError> {
    if cfg.h >= cfg.h_prime {
        return Err(PercolationError::Levels { h: cfg.h, h_prime: cfg.h_prime });
    }
    let n = g.n();
    let k = cfg.h.min(cfg.k0);
    let rgp = ReducedGraphParams::from_p(cfg.p, k, cfg.t)?;
    let seeds = RunSeeds::from_master(seed);
    let mg = MidpointGraph::new(g);
    let (_, mut zl) = sample_decomposition(&mg, cfg.k_max, seeds.field);
    let (psi1, _) = split_sprinkle(&mut zl, cfg.t, seeds.split, SplitMode::Conditional)?;
    let zbar = sample_zbar(n, seeds.sprinkle);
    let mask: Vec<bool> =
        (0..n).map(|x| psi1.values[x] >= cfg.h_prime && rgp.keeps(psi1.values[x], zbar[x])).collect();
    let fixed = components(g, &mask);
    let threshold = mesoscopic_threshold(n, cfg.c_meso);
    let in_meso: Vec<bool> = (0..n).map(|x| fixed.size_of(x) >= threshold).collect();
    let meso_count = in_meso.iter().filter(|&&b| b).count();
    let meso_components = fixed.sizes.iter().take_while(|&&s| s >= threshold).count();

    let bar = psi1.add(&bar_psi2_from(&zbar, cfg.t, seeds.sprinkle));
    let sprinkled = level_components(g, &bar.values, cfg.h);
    let mut mass = vec![0usize; sprinkled.size_by_id.len()];
    for x in (0..n).filter(|&x| in_meso[x]) {
        let c = sprinkled.component[x];
        if c != OUTSIDE {
            mass[c as usize] += 1;
        }
    }
    let best = mass.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)));
    let (merged_size, merged_meso_mass) = match best {
        Some((c, &m)) if m > 0 => (sprinkled.size_by_id[c], m),
        _ => (0, 0),
    };
    let target = (1.0 - 2.0 * cfg.delta) * cfg.eta_ref * n as f64;
    let merged = meso_count > 0 && 2 * merged_meso_mass >= meso_count && merged_size as f64 >= target;
    let (bad_zbar, bad_floor) = bad_set_counts(&psi1.values, &zbar, rgp.k, rgp.l);
    Ok(SprinkleRecord {
        seed,
        n,
        d: g.degree(),
        h: cfg.h,
        h_prime: cfg.h_prime,
        p: cfg.p,
        t: cfg.t,
        k,
        l: rgp.l,
        c_max: sprinkled.c_max(),
        c_sec: sprinkled.c_sec(),
        meso_threshold: threshold,
        meso_count,
        meso_components,
        merged_size,
        merged_meso_mass,
        merged,
        centering: (zbar.iter().sum::<f64>() / n as f64).abs(),
        eps: cfg.h_prime - cfg.h,
        eta_ref: cfg.eta_ref,
        bad_zbar,
        bad_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AdjacencyGraph;
    use crate::sampler::Provenance;

    fn k4() -> Graph {
        build_random_regular(4, 3, 0).unwrap()
    }

    fn field(values: Vec<f64>) -> Field {
        Field { values, provenance: Provenance::Exact, seed: 0, t: None, k_max: None }
    }

    #[test]
    fn level_set_extremes_and_k4() {
        let f = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(level_set(&f, f64::NEG_INFINITY), vec![true; 4]);
        assert_eq!(level_set(&f, f64::INFINITY), vec![false; 4]);
        assert_eq!(level_set(&f, 0.0), vec![true, true, false, false]);
        let s = components(&k4(), &level_set(&f, 0.0));
        assert_eq!(s.sizes, vec![2]);
        assert_eq!(components(&k4(), &[true; 4]).sizes, vec![4]);
    }

    #[test]
    fn path_components_and_small_fraction() {
        // path 0-1-2-3-4-5 with vertex 2 removed
        let g = AdjacencyGraph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let s = components(&g, &[true, true, false, true, true, true]);
        assert_eq!(s.sizes, vec![3, 2]);
        assert_eq!(s.component, vec![0, 0, OUTSIDE, 1, 1, 1]);
        assert_eq!(s.c_max(), 3);
        assert_eq!(s.c_sec(), 2);
        assert_eq!(s.mesoscopic_count(3), 3);
        assert_eq!(s.mesoscopic_count(2), 5);
        // r = 2: balls of radius 1. {0,1} fits around both; {3,4,5} only around 4.
        assert!((s.small_fraction(&g, 2) - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn small_fraction_above_maximum_is_one() {
        let g = k4();
        let psi = field(vec![0.5, -0.1, 0.2, -0.6]);
        assert_eq!(small_component_fraction(&g, &psi, 10.0, 2), 1.0);
    }

    #[test]
    fn reduced_floor_matches_retention() {
        let rgp = ReducedGraphParams::from_p(0.95, -1.0, 0.1).unwrap();
        let z = rgp.l / libm::sqrt(0.5);
        assert!((normal_sf(z) - 0.95).abs() < 1e-12);
        assert!(rgp.l < 0.0);
        assert_eq!(ReducedGraphParams::from_p(0.4, 0.0, 0.1).unwrap_err(), PercolationError::P(0.4));
        assert_eq!(floor_for_retention(1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn vacuous_scan_is_plain_level_set() {
        let g = build_random_regular(200, 3, 4).unwrap();
        let mg = MidpointGraph::new(&g);
        let (psi, _) = sample_decomposition(&mg, 50, 9);
        let zbar = sample_zbar(200, 1);
        let scan = mesoscopic_scan(&g, &psi, &psi, &zbar, &ReducedGraphParams::vacuous(0.0), 0.0, 0.3).unwrap();
        let plain = level_components(&g, &psi.values, 0.0);
        assert_eq!(scan.stats.sizes, plain.sizes);
        assert_eq!(scan.count, plain.mesoscopic_count(scan.threshold));
    }

    #[test]
    fn scan_rejects_mismatched_fields() {
        let g = k4();
        let a = field(vec![0.0; 4]);
        let b = field(vec![0.0; 3]);
        let err = mesoscopic_scan(&g, &a, &b, &[0.0; 4], &ReducedGraphParams::vacuous(0.0), 0.0, 0.5).unwrap_err();
        assert_eq!(err, PercolationError::Dimension { got: 3, expected: 4 });
    }

    #[test]
    fn giant_at_minus_infinity_is_everything() {
        let run = giant_experiment(100, 3, f64::NEG_INFINITY, 3, Some(10)).unwrap();
        assert_eq!(run.stats.c_max(), 100);
        assert_eq!(run.stats.c_sec(), 0);
    }

    #[test]
    fn exponent_and_strength_check() {
        assert!(mesoscopic_exponent(0.4, 0.95, 1.2, 0.05).is_ok());
        assert!(mesoscopic_exponent(0.4, 0.5, 1.2, 0.05).is_err());
        let c = sprinkle_strength_check(0.0, 0.0, 1.0, 0.1, 1.0, 0.2, 0.4, 1000);
        assert!(c.lhs > 0.0 && c.rhs < 1.0);
    }

    #[test]
    fn sprinkling_record_is_consistent() {
        let g = build_random_regular(2000, 3, 5).unwrap();
        let cfg = SprinkleConfig {
            h: 0.0,
            h_prime: 0.2,
            p: 0.95,
            t: 0.1,
            k0: -2.0,
            delta: 0.2,
            c_meso: 0.1,
            eta_ref: 0.3,
            k_max: 200,
        };
        let a = sprinkling_run(&g, &cfg, 11).unwrap();
        let b = sprinkling_run(&g, &cfg, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.c_max >= a.c_sec);
        assert!(a.merged_meso_mass <= a.meso_count);
        assert!(a.merged_size >= a.merged_meso_mass);
        assert_eq!(a.k, -2.0);
    }
}
