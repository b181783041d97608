//! Samplers for the zero-average Gaussian free field on a regular graph.
//!
//! Two routes are provided. [`ExactSampler`] factors a dense covariance
//! table. [`sample_decomposition`] builds the field from independent white
//! noise layers `Z_k` on the midpoint graph,
//!
//! ```text
//! Psi(x) = sum_{k=0}^{K} ((Id - Pi) Q^k Z_k)(x),
//! ```
//!
//! where `Q` is the simple random walk on the midpoint graph and `Pi`
//! subtracts the average over original vertices. The sum is evaluated by
//! Horner's rule from the top layer down, so each sample costs
//! `O(K * |E(midpoint graph)|)` and never stores more than two layers.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::graph::MidpointGraph;
use crate::rng::{self, stream_rng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("sprinkle strength t = {0} outside [0, 1)")]
    BadStrength(f64),
    #[error("vertex {0} is a midpoint")]
    Midpoint(usize),
    #[error("field has {got} entries, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Decomposition,
    Split1,
    Split2,
    Bar2,
    Sum,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Decomposition => "decomposition",
            Provenance::Split1 => "split1",
            Provenance::Split2 => "split2",
            Provenance::Bar2 => "bar2",
            Provenance::Sum => "sum",
        }
    }
}

/// A real function on the original vertices together with how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
    pub t: Option<f64>,
    pub k_max: Option<usize>,
}

impl Field {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Pointwise sum of two fields.
    pub fn add(&self, other: &Field) -> Field {
        Field {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            provenance: Provenance::Sum,
            seed: self.seed,
            t: self.t.or(other.t),
            k_max: self.k_max.or(other.k_max),
        }
    }
}

fn center(values: &mut [f64]) {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= m);
}

/// Gaussian sampler from the spectral factor of a rank-deficient covariance.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    /// `n x r` factor with `F F^T = cov` restricted to the positive spectrum.
    factor: DMatrix<f64>,
}

impl ExactSampler {
    /// Relative size below which an eigenvalue is treated as the null direction.
    const NULL_TOL: f64 = 1e-10;

    pub fn new(cov: &DMatrix<f64>) -> Result<Self, SamplerError> {
        let eig = SymmetricEigen::new(cov.clone());
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min < -1e-8 * scale.max(1.0) {
            return Err(SamplerError::NotPsd(min));
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > Self::NULL_TOL * scale)
            .collect();
        let n = cov.nrows();
        let mut factor = DMatrix::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let s = libm::sqrt(eig.eigenvalues[i]);
            for r in 0..n {
                factor[(r, c)] = eig.eigenvectors[(r, i)] * s;
            }
        }
        Ok(ExactSampler { factor })
    }

    pub fn sample(&self, seed: u64) -> Field {
        let mut rng = rng::tagged_rng(seed, rng::tag::EXACT);
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &self.factor * z;
        Field {
            values: v.iter().copied().collect(),
            provenance: Provenance::Exact,
            seed,
            t: None,
            k_max: None,
        }
    }
}

/// One exact sample from `cov`.
pub fn sample_exact(cov: &DMatrix<f64>, seed: u64) -> Result<Field, SamplerError> {
    Ok(ExactSampler::new(cov)?.sample(seed))
}

/// `(Pi f)(x)`: the average of `f` over original vertices.
pub fn project_pi(mg: &MidpointGraph<'_>, f: &[f64], x: usize) -> Result<f64, SamplerError> {
    if mg.is_midpoint(x) {
        return Err(SamplerError::Midpoint(x));
    }
    let n = mg.n_original();
    Ok(f[..n].iter().sum::<f64>() / n as f64)
}

/// Per-site standard deviations of the noise layers: `sqrt(1/2)` on
/// original vertices and `sqrt(d/4)` on midpoints.
fn layer_sd(mg: &MidpointGraph<'_>) -> (f64, f64) {
    (libm::sqrt(0.5), libm::sqrt(mg.base().degree() as f64 / 4.0))
}

/// Regenerates noise layer `k` for `seed` into `out`.
pub fn generate_layer(mg: &MidpointGraph<'_>, seed: u64, k: usize, out: &mut [f64]) {
    let (s_orig, s_mid) = layer_sd(mg);
    let n = mg.n_original();
    let mut rng = stream_rng(seed, k as u64);
    for (x, o) in out.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *o = z * if x < n { s_orig } else { s_mid };
    }
}

/// Noise layers of one decomposition sample.
///
/// Only layer 0 and the accumulated higher-order part
/// `T = sum_{k>=1} Q^k Z_k` (on original vertices) are kept; any other layer
/// is regenerated on demand from `(seed, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZLayers {
    pub seed: u64,
    pub k_max: usize,
    /// Layer 0 on all midpoint-graph vertices.
    pub layer0: Vec<f64>,
    /// `sum_{k=1}^{K} Q^k Z_k` on original vertices.
    pub tail: Vec<f64>,
}

impl ZLayers {
    pub fn layer(&self, mg: &MidpointGraph<'_>, k: usize) -> Vec<f64> {
        if k == 0 {
            return self.layer0.clone();
        }
        let mut out = vec![0.0; mg.n_total()];
        generate_layer(mg, self.seed, k, &mut out);
        out
    }

    /// The field `(Id - Pi)(Z_0 + T)` on original vertices.
    pub fn field(&self) -> Field {
        let mut values: Vec<f64> = self.layer0.iter().zip(&self.tail).map(|(a, b)| a + b).collect();
        center(&mut values);
        Field {
            values,
            provenance: Provenance::Decomposition,
            seed: self.seed,
            t: None,
            k_max: Some(self.k_max),
        }
    }
}

/// `sum_{k=lo}^{hi} Q^{k-lo} Z_k` on all midpoint-graph vertices by Horner's rule.
pub fn horner_range(mg: &MidpointGraph<'_>, seed: u64, lo: usize, hi: usize) -> Vec<f64> {
    let m = mg.n_total();
    let mut acc = vec![0.0; m];
    let mut layer = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    generate_layer(mg, seed, hi, &mut acc);
    for k in (lo..hi).rev() {
        mg.apply_walk(&acc, &mut tmp);
        generate_layer(mg, seed, k, &mut layer);
        for ((a, t), z) in acc.iter_mut().zip(&tmp).zip(&layer) {
            *a = t + z;
        }
    }
    acc
}

/// Applies `Q^k` to `f` in place.
pub fn apply_walk_power(mg: &MidpointGraph<'_>, f: &mut Vec<f64>, k: usize) {
    let mut tmp = vec![0.0; f.len()];
    for _ in 0..k {
        mg.apply_walk(f, &mut tmp);
        core::mem::swap(f, &mut tmp);
    }
}

/// Truncation level `ceil(40 / gap)`.
pub fn default_k_max(gap: f64) -> usize {
    libm::ceil(40.0 / gap) as usize
}

/// Smallest `K` with `exp(-gap (K + 1)) / gap <= tol`, which bounds the
/// summed variance of the dropped layers.
pub fn k_max_for_tolerance(gap: f64, tol: f64) -> usize {
    libm::ceil((libm::log(1.0 / (tol * gap)) / gap - 1.0).max(0.0)) as usize
}

/// Decomposition sample truncated at layer `k_max`.
pub fn sample_decomposition(mg: &MidpointGraph<'_>, k_max: usize, seed: u64) -> (Field, ZLayers) {
    let n = mg.n_original();
    let m = mg.n_total();
    let mut layer0 = vec![0.0; m];
    generate_layer(mg, seed, 0, &mut layer0);
    let tail = if k_max == 0 {
        vec![0.0; n]
    } else {
        let s = horner_range(mg, seed, 1, k_max);
        let mut t = vec![0.0; m];
        mg.apply_walk(&s, &mut t);
        t.truncate(n);
        t
    };
    layer0.truncate(n);
    let zl = ZLayers { seed, k_max, layer0, tail };
    (zl.field(), zl)
}

/// Covariance of the truncated decomposition sample, computed from the
/// linear map rather than by sampling.
///
/// Row `x` of `Q^k` is recovered from reversibility, `Q^k(x, .) =
/// w(.) (Q^k 1_x)(.) / w(x)` with `w` the stationary weight, so only
/// sparse walk steps are needed.
pub fn decomposition_covariance(mg: &MidpointGraph<'_>, k_max: usize) -> DMatrix<f64> {
    let n = mg.n_original();
    let m = mg.n_total();
    let (s_orig, s_mid) = layer_sd(mg);
    let var: Vec<f64> = (0..m).map(|z| if z < n { s_orig * s_orig } else { s_mid * s_mid }).collect();
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut e = vec![0.0; m];
            e[x] = 1.0 / mg.weight(x);
            e
        })
        .collect();
    let mut tmp = vec![0.0; m];
    let mut rows = DMatrix::<f64>::zeros(n, m);
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for k in 0..=k_max {
        if k > 0 {
            for c in cols.iter_mut() {
                mg.apply_walk(c, &mut tmp);
                core::mem::swap(c, &mut tmp);
            }
        }
        for (x, c) in cols.iter().enumerate() {
            for z in 0..m {
                rows[(x, z)] = c[z] * mg.weight(z) * libm::sqrt(var[z]);
            }
        }
        cov += &rows * rows.transpose();
    }
    let row_mean: Vec<f64> = (0..n).map(|i| cov.row(i).sum() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    DMatrix::from_fn(n, n, |i, j| cov[(i, j)] - row_mean[i] - row_mean[j] + total)
}

/// The single term `((Id - Pi) Q^k Z_k)` on original vertices.
pub fn layer_term(mg: &MidpointGraph<'_>, seed: u64, k: usize) -> Vec<f64> {
    let mut z = vec![0.0; mg.n_total()];
    generate_layer(mg, seed, k, &mut z);
    apply_walk_power(mg, &mut z, k);
    z.truncate(mg.n_original());
    center(&mut z);
    z
}

/// How the sprinkle part of layer 0 is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Draw `Z^1`, `Z^2` independently and redefine `Z_0 = a Z^1 + t Z^2`.
    Fresh,
    /// Keep `Z_0` and draw `Z^1` from its conditional law given `Z_0`.
    Conditional,
}

/// Splits a decomposition sample into `Psi^1 + Psi^2` with independent
/// parts, where `Psi^2 = t (Id - Pi) Z^2` carries the sprinkle.
///
/// In [`SplitMode::Fresh`] the layer 0 in `zl` is overwritten, so
/// `zl.field()` afterwards returns the matching full field.
pub fn split_sprinkle(
    zl: &mut ZLayers,
    t: f64,
    seed2: u64,
    mode: SplitMode,
) -> Result<(Field, Field), SamplerError> {
    if !(0.0..1.0).contains(&t) {
        return Err(SamplerError::BadStrength(t));
    }
    let a = libm::sqrt(1.0 - t * t);
    let sd = libm::sqrt(0.5);
    let n = zl.tail.len();
    let mut rng = rng::tagged_rng(seed2, rng::tag::SPLIT);
    let mut draw = || -> f64 { sd * rng.sample::<f64, _>(StandardNormal) };
    let (z1, z2): (Vec<f64>, Vec<f64>) = match mode {
        SplitMode::Fresh => {
            let z1: Vec<f64> = (0..n).map(|_| draw()).collect();
            let z2: Vec<f64> = (0..n).map(|_| draw()).collect();
            for x in 0..n {
                zl.layer0[x] = a * z1[x] + t * z2[x];
            }
            (z1, z2)
        }
        SplitMode::Conditional => {
            if t == 0.0 {
                let z2 = (0..n).map(|_| draw()).collect();
                (zl.layer0.clone(), z2)
            } else {
                let z1: Vec<f64> = zl.layer0.iter().map(|&z0| a * z0 + t * draw()).collect();
                let z2 = zl.layer0.iter().zip(&z1).map(|(&z0, &z1)| (z0 - a * z1) / t).collect();
                (z1, z2)
            }
        }
    };
    let mut v1: Vec<f64> = z1.iter().zip(&zl.tail).map(|(z, s)| a * z + s).collect();
    center(&mut v1);
    let mut v2: Vec<f64> = z2.iter().map(|z| t * z).collect();
    center(&mut v2);
    let psi1 = Field { values: v1, provenance: Provenance::Split1, seed: seed2, t: Some(t), k_max: Some(zl.k_max) };
    let psi2 = Field { values: v2, provenance: Provenance::Split2, seed: seed2, t: Some(t), k_max: None };
    Ok((psi1, psi2))
}

/// I.i.d. `N(0, 1/2)` values, the independent copy of the layer-0 sprinkle.
pub fn sample_zbar(n: usize, seed: u64) -> Vec<f64> {
    let sd = libm::sqrt(0.5);
    let mut rng = rng::tagged_rng(seed, rng::tag::SPRINKLE);
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `t (zbar - mean(zbar))`.
pub fn bar_psi2_from(zbar: &[f64], t: f64, seed: u64) -> Field {
    let mut values: Vec<f64> = zbar.iter().map(|z| t * z).collect();
    center(&mut values);
    Field { values, provenance: Provenance::Bar2, seed, t: Some(t), k_max: None }
}

/// Independent sprinkle field with the law of `Psi^2`.
pub fn sample_bar_psi2(n: usize, t: f64, seed: u64) -> Result<Field, SamplerError> {
    if !(0.0..1.0).contains(&t) {
        return Err(SamplerError::BadStrength(t));
    }
    Ok(bar_psi2_from(&sample_zbar(n, seed), t, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_random_regular, Graph};
    use crate::stats::CovAccumulator;

    fn k4() -> Graph {
        build_random_regular(4, 3, 0).unwrap()
    }

    #[test]
    fn project_pi_examples() {
        let g = k4();
        let mg = MidpointGraph::new(&g);
        let ones = vec![1.0; 10];
        assert_eq!(project_pi(&mg, &ones, 0).unwrap(), 1.0);
        let w: Vec<f64> = (0..10).map(|x| mg.parity(x)).collect();
        assert_eq!(project_pi(&mg, &w, 2).unwrap(), 1.0);
        let mut mids = vec![0.0; 10];
        mids[4..].iter_mut().for_each(|v| *v = 3.0);
        assert_eq!(project_pi(&mg, &mids, 1).unwrap(), 0.0);
        assert_eq!(project_pi(&mg, &mids, 5), Err(SamplerError::Midpoint(5)));
    }

    #[test]
    fn horner_equals_termwise_sum() {
        let g = build_random_regular(30, 3, 4).unwrap();
        let mg = MidpointGraph::new(&g);
        let (field, _) = sample_decomposition(&mg, 12, 99);
        let mut direct = vec![0.0; 30];
        for k in 0..=12 {
            for (d, v) in direct.iter_mut().zip(layer_term(&mg, 99, k)) {
                *d += v;
            }
        }
        for (a, b) in field.values.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_sums_to_zero() {
        let g = build_random_regular(200, 3, 1).unwrap();
        let mg = MidpointGraph::new(&g);
        for seed in 0..5 {
            let (f, _) = sample_decomposition(&mg, 50, seed);
            assert!(f.sum().abs() < 1e-9 * 200.0);
        }
    }

    #[test]
    fn split_recombines_exactly() {
        let g = build_random_regular(50, 3, 2).unwrap();
        let mg = MidpointGraph::new(&g);
        for mode in [SplitMode::Fresh, SplitMode::Conditional] {
            for &t in &[0.0, 0.3, 0.9] {
                let (f, mut zl) = sample_decomposition(&mg, 40, 5);
                let (p1, p2) = split_sprinkle(&mut zl, t, 77, mode).unwrap();
                let full = if mode == SplitMode::Fresh { zl.field() } else { f };
                for x in 0..50 {
                    assert!((p1.values[x] + p2.values[x] - full.values[x]).abs() < 1e-12);
                }
                if t == 0.0 {
                    assert!(p2.values.iter().all(|v| *v == 0.0));
                }
            }
        }
        let (_, mut zl) = sample_decomposition(&mg, 5, 5);
        assert!(split_sprinkle(&mut zl, 1.0, 1, SplitMode::Fresh).is_err());
    }

    #[test]
    fn bar_psi2_centering_and_zero() {
        let f = sample_bar_psi2(1000, 0.4, 3).unwrap();
        assert!(f.sum().abs() < 1e-10);
        let z = sample_bar_psi2(10, 0.0, 3).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exact_sampler_k4_variance() {
        let g = k4();
        let cov = crate::walk::covariance_table(&crate::walk::zero_average_green(&g).unwrap());
        let s = ExactSampler::new(&cov).unwrap();
        let mut acc = CovAccumulator::new(4);
        for seed in 0..20_000 {
            let f = s.sample(seed);
            assert!(f.sum().abs() < 1e-12);
            acc.push(&f.values);
        }
        assert!((acc.cov(0, 0) - 0.5625).abs() < 0.03);
        assert!((acc.cov(0, 1) + 0.1875).abs() < 0.03);
    }

    #[test]
    fn exact_sampler_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(ExactSampler::new(&m), Err(SamplerError::NotPsd(_))));
    }

    #[test]
    fn k_max_rules() {
        assert_eq!(default_k_max(0.5), 80);
        let k = k_max_for_tolerance(0.1, 1e-4);
        assert!(libm::exp(-0.1 * (k as f64 + 1.0)) / 0.1 <= 1e-4);
        assert!(libm::exp(-0.1 * k as f64) / 0.1 > 1e-4);
    }
}
