//! Coupling of the graph field with two independent tree fields around a
//! pair of distant treelike vertices.
//!
//! Inside a treelike ball of radius `2r` the midpoint graph and the
//! subdivided tree are isomorphic, and both walks have the same transition
//! probabilities. The tree field on `B_T(o, r)` is built as
//!
//! * a head `sum_{k<=2r} Q_T^k Z'_k`, where each `Z'_k` is a bit-exact copy of
//!   the graph layer `Z_k` transported through the isomorphism, and
//! * an independent tail `sum_{k>2r} Q_T^k Z'_k`, which is a centred Gaussian
//!   vector with covariance `g_T - (1/2) sum_{k<=2r} P_T^k` and is sampled
//!   exactly.
//!
//! The head then coincides with the graph head, so
//! `Psi(y) - phi(rho(y)) = S1(y) - S2 - T(rho(y))` with `S1` the graph
//! layers above `2r`, `S2` the projection of the graph head and `T` the tree
//! tail.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::graph::{is_treelike, BallScanner, Graph, MidpointGraph, Topology};
use crate::rng::{self, tagged_rng};
use crate::sampler::{generate_layer, horner_range, Field, Provenance};
use crate::tree::{tree_green, TreeLayout};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CouplingError {
    #[error("vertex {x} is not {radius}-treelike")]
    NotTreelike { x: usize, radius: usize },
    #[error("balls of radius {radius} around {x} and {x_prime} intersect")]
    Overlap { x: usize, x_prime: usize, radius: usize },
    #[error("k_max = {k_max} is below 2r = {two_r}")]
    Truncation { k_max: usize, two_r: usize },
}

/// Canonical isomorphism from the tree ball `B_T(o, radius)` onto a
/// treelike graph ball, children ordered by graph vertex id.
#[derive(Debug, Clone, PartialEq)]
pub struct Isomorphism {
    pub center: usize,
    pub radius: usize,
    pub layout: TreeLayout,
    /// Graph vertex of each flat tree position.
    pub to_graph: Vec<usize>,
}

impl Isomorphism {
    pub fn new(g: &Graph, x: usize, radius: usize) -> Result<Self, CouplingError> {
        if !is_treelike(g, x, radius) {
            return Err(CouplingError::NotTreelike { x, radius });
        }
        let d = g.degree();
        let layout = TreeLayout::new(d, radius);
        let mut to_graph = vec![usize::MAX; layout.len()];
        let mut seen = alloc::collections::BTreeSet::new();
        to_graph[0] = x;
        seen.insert(x);
        for v in 0..layout.ball_len(radius.saturating_sub(1)) {
            if radius == 0 {
                break;
            }
            let gv = to_graph[v];
            let gp = layout.parent_of(v).map(|p| to_graph[p]);
            let kids = layout.children_of(v);
            let mut slot = kids.start;
            for &w in g.neighbors(gv) {
                let w = w as usize;
                if Some(w) == gp {
                    continue;
                }
                if !seen.insert(w) || slot >= kids.end {
                    return Err(CouplingError::NotTreelike { x, radius });
                }
                to_graph[slot] = w;
                slot += 1;
            }
        }
        Ok(Isomorphism { center: x, radius, layout, to_graph })
    }
}

/// The subdivided tree ball `B(o, 2R)` in the midpoint metric: tree
/// vertices of the layout followed by one midpoint per tree edge, indexed by
/// the child endpoint.
struct TreeMidpointBall<'a> {
    layout: &'a TreeLayout,
}

impl TreeMidpointBall<'_> {
    fn n_vertices(&self) -> usize {
        self.layout.len()
    }
    fn len(&self) -> usize {
        2 * self.layout.len() - 1
    }
    /// Midpoint id of the edge above tree position `c >= 1`.
    fn midpoint(&self, c: usize) -> usize {
        self.n_vertices() + c - 1
    }
    /// One step of the walk; mass leaving the ball is dropped.
    fn apply_walk(&self, f: &[f64], out: &mut [f64]) {
        let nv = self.n_vertices();
        let inv_d = 1.0 / self.layout.d as f64;
        for v in 0..nv {
            let mut s = 0.0;
            if v > 0 {
                s += f[self.midpoint(v)];
            }
            for c in self.layout.children_of(v) {
                s += f[self.midpoint(c)];
            }
            out[v] = s * inv_d;
        }
        for c in 1..nv {
            let p = self.layout.parent_of(c).unwrap();
            out[self.midpoint(c)] = 0.5 * (f[p] + f[c]);
        }
    }
}

/// `P_T^k(o, y)` for `|y| = m`, for all `k <= k_max`, `m <= m_max`, via
/// the lazy distance chain.
pub fn tree_lazy_kernel(d: usize, k_max: usize, m_max: usize) -> Vec<Vec<f64>> {
    let df = d as f64;
    let width = k_max + 1;
    let mut dist = vec![0.0; width + 1];
    dist[0] = 1.0;
    let mut out = Vec::with_capacity(k_max + 1);
    let sphere = |m: usize| if m == 0 { 1.0 } else { df * libm::pow(df - 1.0, (m - 1) as f64) };
    for _ in 0..=k_max {
        out.push((0..=m_max).map(|m| if m < dist.len() { dist[m] / sphere(m) } else { 0.0 }).collect());
        let mut next = vec![0.0; width + 1];
        for m in 0..width {
            let p = dist[m];
            if p == 0.0 {
                continue;
            }
            next[m] += 0.5 * p;
            if m == 0 {
                next[1] += 0.5 * p;
            } else {
                next[m - 1] += p / (2.0 * df);
                next[m + 1] += p * (df - 1.0) / (2.0 * df);
            }
        }
        dist = next;
    }
    out
}

/// Exact sampler of the tree tail on `B_T(o, r)`.
#[derive(Debug, Clone)]
pub struct TailSampler {
    factor: DMatrix<f64>,
}

impl TailSampler {
    pub fn new(d: usize, r: usize) -> Self {
        let layout = TreeLayout::new(d, r);
        let n = layout.len();
        let two_r = 2 * r;
        let kernel = tree_lazy_kernel(d, two_r, two_r);
        let head: Vec<f64> = (0..=two_r)
            .map(|m| 0.5 * kernel.iter().map(|row| row[m]).sum::<f64>())
            .collect();
        let cov = DMatrix::from_fn(n, n, |a, b| {
            let m = layout.distance(a, b);
            tree_green(d, m) - head[m]
        });
        let eig = SymmetricEigen::new(cov);
        let mut factor = eig.eigenvectors.clone();
        for (c, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = libm::sqrt(lam.max(0.0));
            factor.column_mut(c).iter_mut().for_each(|v| *v *= s);
        }
        TailSampler { factor }
    }

    pub fn sample(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = tagged_rng(seed, stream);
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().copied().collect()
    }
}

/// First vertex pair `(x, x')` in id order with both `2r`-treelike and
/// `dist(x, x') > 4r`.
pub fn find_coupling_pair(g: &Graph, r: usize) -> Option<(usize, usize)> {
    let n = g.n();
    let mut scan = BallScanner::new(n);
    let treelike = |scan: &mut BallScanner, v: usize| {
        let (a, b) = scan.ball_counts(g, v, 2 * r);
        b + 1 == a
    };
    let x = (0..n).find(|&v| treelike(&mut scan, v))?;
    let near = scan.ball(g, x, 4 * r);
    let mut close = vec![false; n];
    near.iter().for_each(|&v| close[v] = true);
    let xp = (0..n).find(|&v| !close[v] && treelike(&mut scan, v))?;
    Some((x, xp))
}

/// Precomputed geometry of a coupling experiment for a fixed pair.
#[derive(Debug, Clone)]
pub struct CouplingPlan {
    pub r: usize,
    pub k_max: usize,
    pub rho: Isomorphism,
    pub rho_prime: Isomorphism,
    tail: TailSampler,
}

impl CouplingPlan {
    pub fn new(g: &Graph, x: usize, x_prime: usize, r: usize, k_max: usize) -> Result<Self, CouplingError> {
        if k_max < 2 * r {
            return Err(CouplingError::Truncation { k_max, two_r: 2 * r });
        }
        let mut scan = BallScanner::new(g.n());
        let ball = scan.ball(g, x, 2 * r);
        let mut inside = vec![false; g.n()];
        ball.iter().for_each(|&v| inside[v] = true);
        if scan.ball(g, x_prime, 2 * r).iter().any(|&v| inside[v]) {
            return Err(CouplingError::Overlap { x, x_prime, radius: 2 * r });
        }
        Ok(CouplingPlan {
            r,
            k_max,
            rho: Isomorphism::new(g, x, 2 * r)?,
            rho_prime: Isomorphism::new(g, x_prime, 2 * r)?,
            tail: TailSampler::new(g.degree(), r),
        })
    }

    /// Draws one coupled sample.
    pub fn sample(&self, mg: &MidpointGraph<'_>, seed: u64) -> CoupledSample {
        let two_r = 2 * self.r;
        let n = mg.n_original();
        let head = horner_range(mg, seed, 0, two_r);
        let s2 = head[..n].iter().sum::<f64>() / n as f64;
        let mut upper = if self.k_max > two_r {
            let mut s = horner_range(mg, seed, two_r + 1, self.k_max);
            crate::sampler::apply_walk_power(mg, &mut s, two_r + 1);
            s.truncate(n);
            s
        } else {
            vec![0.0; n]
        };
        // the full field is the centred sum of both parts
        let mut values: Vec<f64> = head[..n].iter().zip(&upper).map(|(a, b)| a + b).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        let psi = Field { values, provenance: Provenance::Decomposition, seed, t: None, k_max: Some(self.k_max) };
        let m = upper.iter().sum::<f64>() / n as f64;
        upper.iter_mut().for_each(|v| *v -= m);

        let side = |iso: &Isomorphism, stream: u64| -> TreeSide {
            let ball = TreeMidpointBall { layout: &iso.layout };
            let ids = graph_ids(mg, iso);
            let mut layers = Vec::with_capacity(two_r + 1);
            let mut z = vec![0.0; mg.n_total()];
            for k in 0..=two_r {
                generate_layer(mg, seed, k, &mut z);
                layers.push(ids.iter().map(|&gid| z[gid]).collect::<Vec<f64>>());
            }
            // Horner over the copied layers
            let mut acc = layers[two_r].clone();
            let mut tmp = vec![0.0; ball.len()];
            for k in (0..two_r).rev() {
                ball.apply_walk(&acc, &mut tmp);
                for ((a, t), zk) in acc.iter_mut().zip(&tmp).zip(&layers[k]) {
                    *a = t + zk;
                }
            }
            let nr = iso.layout.ball_len(self.r);
            let tail = self.tail.sample(seed, stream);
            let head_vals: Vec<f64> = acc[..nr].to_vec();
            let phi = head_vals.iter().zip(&tail).map(|(h, t)| h + t).collect();
            TreeSide { ids, layers, phi, tail }
        };
        let a = side(&self.rho, rng::tag::COUPLING_TAIL);
        let b = side(&self.rho_prime, rng::tag::COUPLING);
        let nr = self.rho.layout.ball_len(self.r);
        let s1 = self.rho.to_graph[..nr].iter().map(|&v| upper[v]).collect();
        let s1_prime = self.rho_prime.to_graph[..nr].iter().map(|&v| upper[v]).collect();
        CoupledSample {
            r: self.r,
            k_max: self.k_max,
            seed,
            psi,
            phi: a.phi,
            phi_prime: b.phi,
            shared_ids: a.ids,
            shared_ids_prime: b.ids,
            tree_layers: a.layers,
            tree_layers_prime: b.layers,
            graph_tail: s1,
            graph_tail_prime: s1_prime,
            head_projection: s2,
            tree_tail: a.tail,
            tree_tail_prime: b.tail,
        }
    }
}

struct TreeSide {
    ids: Vec<usize>,
    layers: Vec<Vec<f64>>,
    phi: Vec<f64>,
    tail: Vec<f64>,
}

/// Midpoint-graph id of every vertex of the subdivided tree ball.
fn graph_ids(mg: &MidpointGraph<'_>, iso: &Isomorphism) -> Vec<usize> {
    let nv = iso.layout.len();
    let mut ids = iso.to_graph.clone();
    for c in 1..nv {
        let p = iso.layout.parent_of(c).unwrap();
        ids.push(mg.midpoint(iso.to_graph[p], iso.to_graph[c]).expect("tree edge maps to a graph edge"));
    }
    ids
}

/// Joint sample of the graph field and the two tree fields.
#[derive(Debug, Clone)]
pub struct CoupledSample {
    pub r: usize,
    pub k_max: usize,
    pub seed: u64,
    pub psi: Field,
    /// Tree field on `B_T(o, r)` for each centre, in layout order.
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    /// Midpoint-graph ids identified with the subdivided tree balls.
    pub shared_ids: Vec<usize>,
    pub shared_ids_prime: Vec<usize>,
    /// Tree-side layers `k <= 2r` on the subdivided tree balls.
    pub tree_layers: Vec<Vec<f64>>,
    pub tree_layers_prime: Vec<Vec<f64>>,
    /// Centred graph layers above `2r`, on the radius-`r` ball.
    pub graph_tail: Vec<f64>,
    pub graph_tail_prime: Vec<f64>,
    /// Original-vertex average of the graph head.
    pub head_projection: f64,
    /// Tree layers above `2r`, on `B_T(o, r)`.
    pub tree_tail: Vec<f64>,
    pub tree_tail_prime: Vec<f64>,
}

/// Samples the coupling of the graph field around `x`, `x'` with two tree fields.
pub fn build_coupled(g: &Graph, x: usize, x_prime: usize, r: usize, k_max: usize, seed: u64) -> Result<CoupledSample, CouplingError> {
    let plan = CouplingPlan::new(g, x, x_prime, r, k_max)?;
    let mg = MidpointGraph::new(g);
    Ok(plan.sample(&mg, seed))
}

/// `(D(x, r), D(x', r))`: largest discrepancy between graph and tree field
/// over the radius-`r` balls.
pub fn measure_d(plan: &CouplingPlan, cs: &CoupledSample) -> (f64, f64) {
    let nr = plan.rho.layout.ball_len(plan.r);
    let max_gap = |iso: &Isomorphism, phi: &[f64]| {
        (0..nr).map(|v| (cs.psi.values[iso.to_graph[v]] - phi[v]).abs()).fold(0.0, f64::max)
    };
    (max_gap(&plan.rho, &cs.phi), max_gap(&plan.rho_prime, &cs.phi_prime))
}

/// Re-generates the graph layers `k <= 2r` and checks that the tree-side
/// copies are bit-identical on both subdivided balls.
pub fn verify_sharing(mg: &MidpointGraph<'_>, cs: &CoupledSample) -> bool {
    let mut z = vec![0.0; mg.n_total()];
    (0..=2 * cs.r).all(|k| {
        generate_layer(mg, cs.seed, k, &mut z);
        let same = |ids: &[usize], layer: &[f64]| ids.iter().zip(layer).all(|(&i, &v)| z[i].to_bits() == v.to_bits());
        same(&cs.shared_ids, &cs.tree_layers[k]) && same(&cs.shared_ids_prime, &cs.tree_layers_prime[k])
    })
}

/// Largest deviation between the direct difference `Psi - phi o rho` and
/// the three-term decomposition `S1 - S2 - T`, over both balls.
pub fn decomposition_error(plan: &CouplingPlan, cs: &CoupledSample) -> f64 {
    let nr = plan.rho.layout.ball_len(plan.r);
    let err = |iso: &Isomorphism, phi: &[f64], s1: &[f64], t: &[f64]| {
        (0..nr)
            .map(|v| {
                let direct = cs.psi.values[iso.to_graph[v]] - phi[v];
                (direct - (s1[v] - cs.head_projection - t[v])).abs()
            })
            .fold(0.0, f64::max)
    };
    err(&plan.rho, &cs.phi, &cs.graph_tail, &cs.tree_tail)
        .max(err(&plan.rho_prime, &cs.phi_prime, &cs.graph_tail_prime, &cs.tree_tail_prime))
}
