//! Lazy random walk and the zero-average Green function.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::graph::{is_connected, BallScanner, Graph, Topology};

/// Largest graph for which a dense Green table is built by default.
pub const DEFAULT_GREEN_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GreenError {
    #[error("graph has {n} vertices, dense Green table capped at {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("linear system is singular (graph disconnected)")]
    Singular,
}

/// One lazy step: `(P f)(x) = f(x)/2 + (1/(2 deg x)) * sum_{y~x} f(y)`.
pub fn lazy_step<T: Topology + ?Sized>(g: &T, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    lazy_step_into(g, f, &mut out);
    out
}

pub fn lazy_step_into<T: Topology + ?Sized>(g: &T, f: &[f64], out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate() {
        let nb = g.neighbors(x);
        let s: f64 = nb.iter().map(|&y| f[y as usize]).sum();
        *o = 0.5 * f[x] + 0.5 * s / nb.len() as f64;
    }
}

/// `P^k(x, x)` for `k = 0..=k_max`.
pub fn return_probabilities<T: Topology + ?Sized>(g: &T, x: usize, k_max: usize) -> Vec<f64> {
    let n = g.vertex_count();
    let mut f = vec![0.0; n];
    let mut next = vec![0.0; n];
    f[x] = 1.0;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(1.0);
    // On a regular graph P is symmetric, so iterating on e_x yields the row.
    for _ in 0..k_max {
        lazy_step_into(g, &f, &mut next);
        core::mem::swap(&mut f, &mut next);
        out.push(f[x]);
    }
    out
}

/// Dense zero-average Green function of a regular graph.
#[derive(Debug, Clone)]
pub struct GreenTable {
    n: usize,
    d: usize,
    /// `g(x, y) = G(x, y) / d`, row-major.
    gbar: Vec<f64>,
    c0: f64,
}

impl GreenTable {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn degree(&self) -> usize {
        self.d
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    /// Normalised Green function `g(x, y)`.
    pub fn gbar(&self, x: usize, y: usize) -> f64 {
        self.gbar[x * self.n + y]
    }
    /// Unnormalised `G(x, y) = sum_k (P^k(x, y) - 1/N)`.
    pub fn green(&self, x: usize, y: usize) -> f64 {
        self.d as f64 * self.gbar(x, y)
    }
}

/// Solves `(I - P + 1 pi^T) G = I - 1 pi^T` for the zero-average Green function.
pub fn zero_average_green(g: &Graph) -> Result<GreenTable, GreenError> {
    zero_average_green_capped(g, DEFAULT_GREEN_CAP)
}

pub fn zero_average_green_capped(g: &Graph, cap: usize) -> Result<GreenTable, GreenError> {
    let n = g.n();
    if n > cap {
        return Err(GreenError::TooLarge { n, cap });
    }
    if !is_connected(g) {
        return Err(GreenError::Singular);
    }
    let pi = 1.0 / n as f64;
    let half_d = 0.5 / g.degree() as f64;
    let mut a = DMatrix::from_element(n, n, pi);
    for x in 0..n {
        a[(x, x)] += 0.5;
        for &y in g.neighbors(x) {
            a[(x, y as usize)] -= half_d;
        }
    }
    let mut rhs = DMatrix::from_element(n, n, -pi);
    for x in 0..n {
        rhs[(x, x)] += 1.0;
    }
    let lu = a.lu();
    let sol = lu.solve(&rhs).ok_or(GreenError::Singular)?;
    let d = g.degree() as f64;
    let mut gbar = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            // symmetrise away round-off
            gbar[x * n + y] = 0.5 * (sol[(x, y)] + sol[(y, x)]) / d;
        }
    }
    Ok(GreenTable { n, d: g.degree(), gbar, c0: d / 2.0 })
}

/// Covariance `C0 * g(x, y)` of the zero-average field.
pub fn covariance_table(gt: &GreenTable) -> DMatrix<f64> {
    let n = gt.n;
    DMatrix::from_fn(n, n, |i, j| gt.c0 * gt.gbar(i, j))
}

/// Truncated series `sum_{k<=K} (P^k - 1 pi^T)`, computed by dense powers.
pub fn green_series(g: &Graph, k_max: usize) -> DMatrix<f64> {
    let n = g.n();
    let pi = 1.0 / n as f64;
    let mut p = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        p[(x, x)] += 0.5;
        for &y in g.neighbors(x) {
            p[(x, y as usize)] += 0.5 / g.degree() as f64;
        }
    }
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for _ in 0..=k_max {
        acc += power.map(|v| v - pi);
        power = &power * &p;
    }
    acc
}

/// Empirical envelope of the normalised Green function by graph distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenDecayFit {
    /// `max g(x, y)` over pairs at each distance.
    pub max_by_distance: Vec<f64>,
    /// Fitted prefactor of the geometric part.
    pub c: f64,
    /// Exponent of the flat `N^{-eps}` floor.
    pub eps: f64,
}

/// Fits `g(x, y) <= C (d-1)^{-dist} + N^{-eps}`.
///
/// The floor is set by the largest value at distances beyond half the
/// typical distance `log_{d-1} N`; `C` is then the smallest prefactor that
/// makes the bound hold at every pair.
pub fn fit_green_decay(g: &Graph, gt: &GreenTable) -> GreenDecayFit {
    let n = g.n();
    let base = (g.degree() - 1) as f64;
    let mut scan = BallScanner::new(n);
    let mut max_by_distance: Vec<f64> = Vec::new();
    for x in 0..n {
        let _ = scan.ball(g, x, n);
        for y in 0..n {
            let dist = scan.distance(y).unwrap_or(0);
            if max_by_distance.len() <= dist {
                max_by_distance.resize(dist + 1, f64::NEG_INFINITY);
            }
            let v = gt.gbar(x, y);
            if v > max_by_distance[dist] {
                max_by_distance[dist] = v;
            }
        }
    }
    let far = libm::ceil(0.5 * libm::log(n as f64) / libm::log(base)) as usize;
    let floor = max_by_distance
        .iter()
        .skip(far)
        .fold(f64::MIN_POSITIVE, |m, &v| m.max(v));
    let eps = (-libm::log(floor) / libm::log(n as f64)).max(0.0);
    let floor = libm::pow(n as f64, -eps);
    let c = max_by_distance
        .iter()
        .enumerate()
        .map(|(r, &v)| (v - floor).max(0.0) * libm::pow(base, r as f64))
        .fold(0.0, f64::max);
    GreenDecayFit { max_by_distance, c, eps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_random_regular;

    #[test]
    fn lazy_step_examples() {
        let g = build_random_regular(4, 3, 0).unwrap();
        assert_eq!(lazy_step(&g, &[1.0; 4]), vec![1.0; 4]);
        let out = lazy_step(&g, &[1.0, 0.0, 0.0, 0.0]);
        let expect = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn k4_green_entries() {
        let g = build_random_regular(4, 3, 0).unwrap();
        let gt = zero_average_green(&g).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                let expect = if x == y { 9.0 / 8.0 } else { -3.0 / 8.0 };
                assert!((gt.green(x, y) - expect).abs() < 1e-12);
            }
        }
        let cov = covariance_table(&gt);
        assert!((cov[(0, 0)] - 0.5625).abs() < 1e-12);
        assert!((cov[(0, 1)] + 0.1875).abs() < 1e-12);
    }

    #[test]
    fn size_cap_is_enforced() {
        let g = build_random_regular(20, 3, 0).unwrap();
        assert_eq!(
            zero_average_green_capped(&g, 10).unwrap_err(),
            GreenError::TooLarge { n: 20, cap: 10 }
        );
    }

    #[test]
    fn return_probability_k4() {
        let g = build_random_regular(4, 3, 0).unwrap();
        let r = return_probabilities(&g, 0, 3);
        // eigenvalues 1 and 1/3 (x3): P^k(x,x) = 1/4 + (3/4)(1/3)^k
        for (k, v) in r.iter().enumerate() {
            let expect = 0.25 + 0.75 * libm::pow(1.0 / 3.0, k as f64);
            assert!((v - expect).abs() < 1e-14);
        }
    }
}
