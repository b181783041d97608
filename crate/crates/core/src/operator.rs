//! Quadrature discretisation of the branching operators of the tree level
//! set and their principal eigenvalue.
//!
//! For a parent value `a >= h` the mean-offspring operator is
//!
//! ```text
//! (L f)(a) = p (d-1) E[ 1{sum_i (a/(d-1) + Y_i) >= gamma} (f 1_[h,inf))(a/(d-1) + Y_1) ]
//! ```
//!
//! with `Y_i` i.i.d. `N(0, d/(d-1))`. Conditioning on `Y_1` leaves a normal
//! tail probability for the other `d - 2` summands, so
//!
//! ```text
//! (L f)(a) = p (d-1) int_h^inf q(y - a/(d-1)) S(a, y) f(y) dy,
//! S(a, y) = P( N((d-2) a/(d-1), (d-2) d/(d-1)) >= gamma - y ),
//! ```
//!
//! where `q` is the `N(0, d/(d-1))` density. The grid stores the Lebesgue
//! form `M_ij = w_j (d-1) p q(a_j - a_i/(d-1)) S(a_i, a_j)`; the kernel
//! against the Gaussian reference measure `nu` is `M_ij / (w_j nu(a_j))`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{tag, tagged_rng};
use crate::stats::{normal_pdf, normal_sf};
use crate::tree::Threshold;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("degree {0} is below 3")]
    Degree(usize),
    #[error("p = {0} outside [0, 1]")]
    P(f64),
    #[error("need at least 32 quadrature nodes, got {0}")]
    Nodes(usize),
    #[error("level h must be finite")]
    Level,
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("lambda - 1 does not change sign on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Discretised operator on `[h, h_max]`.
#[derive(Debug, Clone)]
pub struct OperatorGrid {
    pub d: usize,
    pub h: f64,
    pub p: f64,
    pub gamma: Threshold,
    pub nodes: Vec<f64>,
    /// Lebesgue quadrature weights.
    pub weights: Vec<f64>,
    /// Reference density `nu` at the nodes.
    pub nu: Vec<f64>,
    /// Row-major Lebesgue-form matrix `M`.
    matrix: Vec<f64>,
}

impl OperatorGrid {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// `nu`-measure quadrature weights `w_j nu(a_j)`.
    pub fn nu_weights(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.nu).map(|(w, v)| w * v).collect()
    }

    /// Kernel entry against `nu`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j] / (self.weights[j] * self.nu[j])
    }

    pub fn matrix_entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j]
    }

    /// Quadrature approximation of `L f` at the nodes.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| self.matrix[i * n..(i + 1) * n].iter().zip(f).map(|(m, v)| m * v).sum())
            .collect()
    }

    /// `<f, g>` in `L^2(nu)`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.weights[i] * self.nu[i] * f[i] * g[i]).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        libm::sqrt(self.inner(f, f))
    }
}

/// Standard deviation of the reference measure, `sqrt((d-1)/(d-2))`.
pub fn nu_sd(d: usize) -> f64 {
    libm::sqrt((d - 1) as f64 / (d - 2) as f64)
}

/// Builds the grid on `[h, max(h, 0) + sigmas * sd(nu)]` with `n_nodes`
/// Gauss–Legendre nodes.
pub fn build_operator(
    d: usize,
    h: f64,
    p: f64,
    gamma: Threshold,
    n_nodes: usize,
    h_max_sigmas: f64,
) -> Result<OperatorGrid, OperatorError> {
    if d < 3 {
        return Err(OperatorError::Degree(d));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(OperatorError::P(p));
    }
    if n_nodes < 32 {
        return Err(OperatorError::Nodes(n_nodes));
    }
    if !h.is_finite() {
        return Err(OperatorError::Level);
    }
    let df = d as f64;
    let sd_nu = nu_sd(d);
    let h_max = h.max(0.0) + h_max_sigmas * sd_nu;
    let (x, w) = gauss_legendre(n_nodes);
    let half = 0.5 * (h_max - h);
    let nodes: Vec<f64> = x.iter().map(|t| h + half * (t + 1.0)).collect();
    let weights: Vec<f64> = w.iter().map(|v| v * half).collect();
    let nu: Vec<f64> = nodes.iter().map(|a| normal_pdf(a / sd_nu) / sd_nu).collect();
    let sd_y = libm::sqrt(df / (df - 1.0));
    let rest_mean = (df - 2.0) / (df - 1.0);
    let rest_sd = libm::sqrt((df - 2.0) * df / (df - 1.0));
    let mut matrix = vec![0.0; n_nodes * n_nodes];
    for (i, &a) in nodes.iter().enumerate() {
        for (j, &y) in nodes.iter().enumerate() {
            let q = normal_pdf((y - a / (df - 1.0)) / sd_y) / sd_y;
            let tail = match gamma {
                Threshold::NegInfinity => 1.0,
                Threshold::Finite(g) => normal_sf((g - y - rest_mean * a) / rest_sd),
            };
            matrix[i * n_nodes + j] = weights[j] * (df - 1.0) * p * q * tail;
        }
    }
    Ok(OperatorGrid { d, h, p, gamma, nodes, weights, nu, matrix })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda: f64,
    /// Principal eigenfunction at the nodes, unit norm in `L^2(nu)`.
    pub chi: Vec<f64>,
    pub iterations: usize,
    /// `|| L chi - lambda chi ||` in `L^2(nu)`.
    pub residual: f64,
}

/// Power iteration from the constant function.
pub fn principal_eigen(og: &OperatorGrid, tol: f64, max_iter: usize) -> Result<EigenResult, OperatorError> {
    let n = og.n();
    let mut v = vec![1.0; n];
    let nv = og.norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let mut w = og.apply(&v);
        let next = og.norm(&w);
        if next == 0.0 {
            return Ok(EigenResult { lambda: 0.0, chi: v, iterations: it, residual: 0.0 });
        }
        w.iter_mut().for_each(|x| *x /= next);
        let done = (next - lambda).abs() < tol;
        lambda = next;
        v = w;
        if done {
            let lv = og.apply(&v);
            let r: Vec<f64> = lv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
            return Ok(EigenResult { lambda, residual: og.norm(&r), chi: v, iterations: it });
        }
    }
    Err(OperatorError::NoConvergence(max_iter))
}

/// Discretisation and solver settings shared by sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_nodes: usize,
    pub h_max_sigmas: f64,
    pub eig_tol: f64,
    pub max_iter: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_nodes: 256, h_max_sigmas: 8.0, eig_tol: 1e-12, max_iter: 100_000 }
    }
}

/// Principal eigenvalue of the operator for `(d, h, p, gamma)`.
pub fn lambda(d: usize, h: f64, p: f64, gamma: Threshold, cfg: &GridConfig) -> Result<f64, OperatorError> {
    let og = build_operator(d, h, p, gamma, cfg.n_nodes, cfg.h_max_sigmas)?;
    Ok(principal_eigen(&og, cfg.eig_tol, cfg.max_iter)?.lambda)
}

/// Level where the plain operator has eigenvalue 1, by bisection on
/// `[lo, hi]` to width `tol`.
pub fn h_star(d: usize, tol: f64, cfg: &GridConfig, lo: f64, hi: f64) -> Result<f64, OperatorError> {
    let f = |h: f64| lambda(d, h, 1.0, Threshold::NegInfinity, cfg).map(|l| l - 1.0);
    let (mut a, mut b) = (lo, hi);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa <= 0.0 || fb >= 0.0 {
        return Err(OperatorError::Bracket { lo, hi });
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Eigenvalues along a sequence of children-sum thresholds.
pub fn lambda_limit_check(
    d: usize,
    h: f64,
    p: f64,
    gammas: &[Threshold],
    cfg: &GridConfig,
) -> Result<Vec<f64>, OperatorError> {
    gammas.iter().map(|&g| lambda(d, h, p, g, cfg)).collect()
}

/// Direct Monte Carlo evaluation of `(L f)(a)` by sampling the `d - 1`
/// child increments and the Bernoulli mark.
#[allow(clippy::too_many_arguments)]
pub fn apply_by_simulation<F: Fn(f64) -> f64>(
    d: usize,
    h: f64,
    p: f64,
    gamma: Threshold,
    a: f64,
    f: F,
    samples: usize,
    seed: u64,
) -> f64 {
    if a < h {
        return 0.0;
    }
    let df = d as f64;
    let sd_y = libm::sqrt(df / (df - 1.0));
    let mut rng = tagged_rng(seed, tag::SIMULATION);
    let mut acc = 0.0;
    for _ in 0..samples {
        let open = rng.random::<f64>() < p;
        let mut sum = 0.0;
        let mut first = 0.0;
        for i in 0..d - 1 {
            let y = a / (df - 1.0) + sd_y * rng.sample::<f64, _>(StandardNormal);
            if i == 0 {
                first = y;
            }
            sum += y;
        }
        if open && gamma.admits(sum) && first >= h {
            acc += f(first);
        }
    }
    (df - 1.0) * acc / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn kernel_nonnegative_and_dominated() {
        let plain = build_operator(3, 0.0, 1.0, Threshold::NegInfinity, 64, 8.0).unwrap();
        let robust = build_operator(3, 0.0, 0.7, Threshold::Finite(0.5), 64, 8.0).unwrap();
        let thinned = build_operator(3, 0.0, 0.7, Threshold::NegInfinity, 64, 8.0).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let k = plain.kernel(i, j);
                assert!(k >= 0.0);
                assert!(robust.kernel(i, j) <= k);
                assert!((thinned.kernel(i, j) - 0.7 * k).abs() <= 1e-14 * k);
            }
        }
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(build_operator(2, 0.0, 1.0, Threshold::NegInfinity, 64, 8.0).unwrap_err(), OperatorError::Degree(2));
        assert_eq!(build_operator(3, 0.0, 1.5, Threshold::NegInfinity, 64, 8.0).unwrap_err(), OperatorError::P(1.5));
        assert_eq!(build_operator(3, 0.0, 1.0, Threshold::NegInfinity, 16, 8.0).unwrap_err(), OperatorError::Nodes(16));
    }

    #[test]
    fn low_level_eigenvalue_is_branching_number() {
        let og = build_operator(3, -8.0, 1.0, Threshold::NegInfinity, 128, 8.0).unwrap();
        let e = principal_eigen(&og, 1e-12, 10_000).unwrap();
        assert!((e.lambda - 2.0).abs() < 1e-3, "{}", e.lambda);
        assert!(e.chi.iter().all(|&c| c > 0.0));
    }
}
