//! The experiments behind the command line driver.
//!
//! Each experiment has a compute function returning a serialisable result
//! and an emitter that turns the result into data files.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Serialize, Serializer};
use zagff_core::coupling::{find_coupling_pair, measure_d, verify_sharing, decomposition_error, CouplingPlan};
use zagff_core::graph::{
    assumption_report, build_random_regular, sampled_min_expansion, spectral_gap, treelike_radius_scan, Graph, MidpointGraph,
};
use zagff_core::operator::{h_star, lambda, GridConfig};
use zagff_core::percolation::{
    default_sprinkle_strength, giant_experiment, mesoscopic_exponent, mesoscopic_scan, sprinkle_strength_check,
    sprinkling_run, ReducedGraphParams, RunSeeds, SprinkleConfig,
};
use zagff_core::rng::{derive_seed, tag};
use zagff_core::sampler::{
    decomposition_covariance, default_k_max, k_max_for_tolerance, sample_decomposition, sample_zbar, split_sprinkle, SplitMode,
};
use zagff_core::stats::CovAccumulator;
use zagff_core::tree::Threshold;
use zagff_core::walk::{covariance_table, fit_green_decay, green_series, zero_average_green};

use crate::config::{validate, Config, ConfigError, Experiment};
use crate::io::{self, FileEntry, IoError, OutputDir};
use crate::LabError;
use crate::parallel::{eta_parallel, ordered_map, replica_seed, with_threads};

fn runtime<E: std::fmt::Display>(e: E) -> LabError {
    LabError::Runtime(e.to_string())
}

/// Largest graph for which dense covariance tables are produced.
pub const DENSE_LIMIT: usize = 4096;
/// Largest graph for which the dense Green series is cross-checked.
pub const SERIES_LIMIT: usize = 512;
/// Replicas per covariance chunk; chunks are merged in order.
const COV_CHUNK: usize = 1000;
const TREELIKE_RADIUS_CAP: usize = 12;

fn graph_for(n: usize, d: usize, master: u64) -> Result<Graph, LabError> {
    build_random_regular(n, d, derive_seed(master, tag::GRAPH, 0)).map_err(runtime)
}

/// Levels may be infinite, which JSON cannot carry as a number.
fn level<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------- green

#[derive(Debug, Clone, Serialize)]
pub struct Assumptions {
    pub alpha_radius: usize,
    pub treelike_fraction: f64,
    pub one_cycle_fraction: f64,
    pub spectral_gap: f64,
    pub min_expansion_sampled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenResult {
    pub n: usize,
    pub d: usize,
    pub graph_seed: u64,
    pub c0: f64,
    pub gap: f64,
    pub series_k: Option<usize>,
    pub series_max_abs_diff: Option<f64>,
    pub row_sum_max_abs: f64,
    pub decay_c: f64,
    pub decay_eps: f64,
    pub max_by_distance: Vec<f64>,
    pub assumptions: Assumptions,
    #[serde(skip)]
    pub covariance: Vec<f64>,
    #[serde(skip)]
    pub graph: Option<Graph>,
}

pub fn green_validate(cfg: &Config) -> Result<GreenResult, LabError> {
    let (n, d, seed): (usize, usize, u64) = (cfg.get("n")?, cfg.get("d")?, cfg.get("seed")?);
    let series_tol = cfg.get_or("series_tol", 1e-8)?;
    let alpha = cfg.get_or("alpha", 0.5)?;
    let samples = cfg.get_or("expansion_samples", 200usize)?;
    let g = graph_for(n, d, seed)?;
    let gt = zero_average_green(&g).map_err(runtime)?;
    let cov = covariance_table(&gt);
    let rep = assumption_report(&g, alpha, samples, derive_seed(seed, tag::EXPANSION, 0));
    let (series_k, series_max_abs_diff) = if n <= SERIES_LIMIT {
        let k = k_max_for_tolerance(rep.spectral_gap, series_tol);
        let s = green_series(&g, k);
        (Some(k), Some(max_abs((0..n).flat_map(|x| (0..n).map(move |y| (x, y))).map(|(x, y)| s[(x, y)] - gt.green(x, y)))))
    } else {
        (None, None)
    };
    let row_sum_max_abs = max_abs((0..n).map(|x| (0..n).map(|y| gt.green(x, y)).sum::<f64>()));
    let fit = fit_green_decay(&g, &gt);
    Ok(GreenResult {
        n,
        d,
        graph_seed: g.seed(),
        c0: gt.c0(),
        gap: rep.spectral_gap,
        series_k,
        series_max_abs_diff,
        row_sum_max_abs,
        decay_c: fit.c,
        decay_eps: fit.eps,
        max_by_distance: fit.max_by_distance,
        assumptions: Assumptions {
            alpha_radius: rep.alpha_radius,
            treelike_fraction: rep.treelike_fraction,
            one_cycle_fraction: rep.one_cycle_fraction,
            spectral_gap: rep.spectral_gap,
            min_expansion_sampled: rep.min_expansion_sampled,
        },
        covariance: cov.iter().copied().collect(),
        graph: Some(g),
    })
}

// ---------------------------------------------------------------- sampler

#[derive(Debug, Clone, Serialize)]
pub struct SamplerResult {
    pub n: usize,
    pub d: usize,
    pub replicas: usize,
    pub k_max: usize,
    pub gap: f64,
    /// Largest entrywise gap between empirical and exact covariance.
    pub max_abs_diff: f64,
    /// Largest entrywise gap between the exact covariance of the truncated
    /// sampler and the exact covariance, when computed.
    pub truncation_max_abs_diff: Option<f64>,
    /// Largest `|sum_x Psi(x)|` over all samples.
    pub max_abs_sum: f64,
    #[serde(skip)]
    pub empirical: Vec<f64>,
    #[serde(skip)]
    pub exact: Vec<f64>,
    #[serde(skip)]
    pub first_sample: Option<zagff_core::sampler::Field>,
}

impl SamplerResult {
    pub fn empirical(&self, i: usize, j: usize) -> f64 {
        self.empirical[i * self.n + j]
    }
    pub fn exact(&self, i: usize, j: usize) -> f64 {
        self.exact[i * self.n + j]
    }
}

pub fn sampler_validate(cfg: &Config) -> Result<SamplerResult, LabError> {
    let (n, d, seed, replicas): (usize, usize, u64, usize) = (cfg.get("n")?, cfg.get("d")?, cfg.get("seed")?, cfg.get("replicas")?);
    let g = graph_for(n, d, seed)?;
    let mg = MidpointGraph::new(&g);
    let gap = spectral_gap(&g);
    let k_max = match cfg.get_opt("k_max")? {
        Some(k) => k,
        None => k_max_for_tolerance(gap, cfg.get_or("tol", 1e-4)?),
    };
    let chunks = replicas.div_ceil(COV_CHUNK);
    let parts = ordered_map(chunks, |c| {
        let mut acc = CovAccumulator::new(n);
        let mut worst = 0.0f64;
        for r in c * COV_CHUNK..((c + 1) * COV_CHUNK).min(replicas) {
            let (f, _) = sample_decomposition(&mg, k_max, replica_seed(seed, Experiment::SamplerValidate, r));
            worst = worst.max(f.sum().abs());
            acc.push(&f.values);
        }
        (acc, worst)
    });
    let mut acc = CovAccumulator::new(n);
    let mut max_abs_sum = 0.0f64;
    for (a, w) in &parts {
        acc.merge(a);
        max_abs_sum = max_abs_sum.max(*w);
    }
    let gt = zero_average_green(&g).map_err(runtime)?;
    let exact = covariance_table(&gt);
    let empirical: Vec<f64> = (0..n * n).map(|i| acc.cov(i / n, i % n)).collect();
    let exact: Vec<f64> = (0..n * n).map(|i| exact[(i / n, i % n)]).collect();
    let max_abs_diff = max_abs(empirical.iter().zip(&exact).map(|(a, b)| a - b));
    let truncation_max_abs_diff = (n <= SERIES_LIMIT).then(|| {
        let dc = decomposition_covariance(&mg, k_max);
        max_abs((0..n * n).map(|i| dc[(i / n, i % n)] - exact[i]))
    });
    let first_sample = (replicas > 0)
        .then(|| sample_decomposition(&mg, k_max, replica_seed(seed, Experiment::SamplerValidate, 0)).0);
    Ok(SamplerResult {
        n,
        d,
        replicas,
        k_max,
        gap,
        max_abs_diff,
        truncation_max_abs_diff,
        max_abs_sum,
        empirical,
        exact,
        first_sample,
    })
}

// ---------------------------------------------------------------- tree eta

#[derive(Debug, Clone, Serialize)]
pub struct EtaResult {
    pub d: usize,
    pub h: f64,
    pub p: f64,
    #[serde(serialize_with = "level")]
    pub gamma: f64,
    pub t: Option<f64>,
    pub depth: usize,
    pub replicas: usize,
    pub survival_fraction: f64,
    pub ci_halfwidth: f64,
    pub mean_front: Vec<f64>,
    #[serde(skip)]
    pub counts: Vec<Vec<u64>>,
}

/// Tree Monte Carlo survival estimate with explicit parameters.
#[allow(clippy::too_many_arguments)]
pub fn tree_eta_with(
    d: usize,
    h: f64,
    p: f64,
    gamma: Threshold,
    t: Option<f64>,
    depth: usize,
    replicas: usize,
    seed: u64,
) -> Result<EtaResult, LabError> {
    if t.is_some() && gamma.is_finite() {
        return Err(LabError::Runtime("the pruned component takes no children-sum threshold".into()));
    }
    let (e, counts) = eta_parallel(d, h, p, gamma, t, depth, replicas, seed).map_err(runtime)?;
    Ok(EtaResult {
        d,
        h,
        p,
        gamma: gamma.as_f64(),
        t,
        depth,
        replicas,
        survival_fraction: e.survival_fraction,
        ci_halfwidth: e.ci_halfwidth,
        mean_front: e.mean_front,
        counts,
    })
}

pub fn tree_eta(cfg: &Config) -> Result<EtaResult, LabError> {
    tree_eta_with(
        cfg.get("d")?,
        cfg.get("h")?,
        cfg.get_or("p", 1.0)?,
        Threshold::from(cfg.get_or("gamma", f64::NEG_INFINITY)?),
        cfg.get_opt("t")?,
        cfg.get("depth")?,
        cfg.get("replicas")?,
        cfg.get("seed")?,
    )
}

// ---------------------------------------------------------------- operator

#[derive(Debug, Clone, Serialize)]
pub struct LambdaRow {
    pub h: f64,
    pub p: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub n_nodes: usize,
}

fn grid(cfg: &Config) -> Result<GridConfig, LabError> {
    Ok(GridConfig { n_nodes: cfg.get_or("n_nodes", 256)?, ..GridConfig::default() })
}

pub fn operator_sweep(cfg: &Config) -> Result<Vec<LambdaRow>, LabError> {
    let d: usize = cfg.get("d")?;
    let (lo, hi, steps): (f64, f64, usize) = (cfg.get("h_min")?, cfg.get("h_max")?, cfg.get("h_steps")?);
    let p = cfg.get_or("p", 1.0)?;
    let gamma = Threshold::from(cfg.get_or("gamma", f64::NEG_INFINITY)?);
    let gc = grid(cfg)?;
    let hs: Vec<f64> = (0..steps)
        .map(|i| if steps == 1 { lo } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
        .collect();
    ordered_map(steps, |i| {
        lambda(d, hs[i], p, gamma, &gc)
            .map(|l| LambdaRow { h: hs[i], p, gamma: gamma.as_f64(), lambda: l, n_nodes: gc.n_nodes })
            .map_err(runtime)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct HstarResult {
    pub d: usize,
    pub h_star: f64,
    pub n_nodes: usize,
    pub tol: f64,
}

/// Bracket searched for the critical level.
pub const HSTAR_BRACKET: (f64, f64) = (-1.0, 5.0);

pub fn hstar_with(d: usize, n_nodes: usize, tol: f64) -> Result<HstarResult, LabError> {
    let gc = GridConfig { n_nodes, ..GridConfig::default() };
    let h = h_star(d, tol, &gc, HSTAR_BRACKET.0, HSTAR_BRACKET.1).map_err(runtime)?;
    Ok(HstarResult { d, h_star: h, n_nodes, tol })
}

pub fn hstar(cfg: &Config) -> Result<HstarResult, LabError> {
    hstar_with(cfg.get("d")?, cfg.get_or("n_nodes", 256)?, cfg.get_or("tol", 1e-6)?)
}

// ---------------------------------------------------------------- coupling

#[derive(Debug, Clone, Serialize)]
pub struct CouplingRow {
    pub replica: usize,
    pub r: usize,
    pub d_x: f64,
    pub d_xprime: f64,
    pub sharing_ok: bool,
    pub identity_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingRadius {
    pub r: usize,
    /// `None` when no pair of distant `2r`-treelike vertices exists.
    pub pair: Option<(usize, usize)>,
    pub tail_fraction: Option<f64>,
    pub sharing_ok: bool,
    pub max_identity_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingResult {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub k_max: usize,
    pub gap: f64,
    pub replicas: usize,
    pub radii: Vec<CouplingRadius>,
    #[serde(skip)]
    pub rows: Vec<CouplingRow>,
}

pub fn coupling_tail(cfg: &Config) -> Result<CouplingResult, LabError> {
    let (n, d, seed, replicas): (usize, usize, u64, usize) = (cfg.get("n")?, cfg.get("d")?, cfg.get("seed")?, cfg.get("replicas")?);
    let eps: f64 = cfg.get("eps")?;
    let radii = cfg.get_list("r")?;
    let g = graph_for(n, d, seed)?;
    let mg = MidpointGraph::new(&g);
    let gap = spectral_gap(&g);
    let r_max = radii.iter().copied().max().unwrap_or(0);
    let k_max = match cfg.get_opt::<usize>("k_max")? {
        Some(k) => k,
        None => k_max_for_tolerance(gap, cfg.get_or("tol", 1e-4)?),
    }
    .max(2 * r_max);
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for &r in &radii {
        let Some((x, xp)) = find_coupling_pair(&g, r) else {
            out.push(CouplingRadius { r, pair: None, tail_fraction: None, sharing_ok: false, max_identity_error: f64::NAN });
            continue;
        };
        let plan = CouplingPlan::new(&g, x, xp, r, k_max).map_err(runtime)?;
        let these = ordered_map(replicas, |i| {
            let s = replica_seed(derive_seed(seed, tag::COUPLING, r as u64), Experiment::CouplingTail, i);
            let cs = plan.sample(&mg, s);
            let (dx, dxp) = measure_d(&plan, &cs);
            CouplingRow { replica: i, r, d_x: dx, d_xprime: dxp, sharing_ok: verify_sharing(&mg, &cs), identity_error: decomposition_error(&plan, &cs) }
        });
        let exceed = these.iter().filter(|row| row.d_x.max(row.d_xprime) > eps).count();
        out.push(CouplingRadius {
            r,
            pair: Some((x, xp)),
            tail_fraction: (replicas > 0).then(|| exceed as f64 / replicas as f64),
            sharing_ok: these.iter().all(|row| row.sharing_ok),
            max_identity_error: these.iter().fold(0.0, |m, row| m.max(row.identity_error)),
        });
        rows.extend(these);
    }
    Ok(CouplingResult { n, d, eps, k_max, gap, replicas, radii: out, rows })
}

// ---------------------------------------------------------------- giant

#[derive(Debug, Clone, Serialize)]
pub struct GiantRow {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    #[serde(serialize_with = "level")]
    pub h: f64,
    pub k_max: usize,
    pub c_max: usize,
    pub c_sec: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GiantResult {
    pub n: usize,
    pub d: usize,
    #[serde(serialize_with = "level")]
    pub h: f64,
    pub replicas: usize,
    pub mean_c_max_fraction: f64,
    pub max_c_sec_fraction: f64,
    pub eta_ref: Option<f64>,
    pub eta_ci: Option<f64>,
    pub rows: Vec<GiantRow>,
}

pub fn giant(cfg: &Config) -> Result<GiantResult, LabError> {
    let (n, d, h, replicas, seed): (usize, usize, f64, usize, u64) =
        (cfg.get("n")?, cfg.get("d")?, cfg.get("h")?, cfg.get("replicas")?, cfg.get("seed")?);
    let k_max: Option<usize> = cfg.get_opt("k_max")?;
    let eta_replicas: usize = cfg.get_or("eta_replicas", 10_000)?;
    let eta_depth: usize = cfg.get_or("eta_depth", 20)?;
    let rows: Vec<GiantRow> = ordered_map(replicas, |i| {
        let s = replica_seed(seed, Experiment::Giant, i);
        giant_experiment(n, d, h, s, k_max).map(|run| GiantRow {
            seed: s,
            n,
            d,
            h,
            k_max: run.k_max,
            c_max: run.stats.c_max(),
            c_sec: run.stats.c_sec(),
        })
    })
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(runtime)?;
    let (eta_ref, eta_ci) = if h.is_finite() && eta_replicas > 0 {
        let e = tree_eta_with(d, h, 1.0, Threshold::NegInfinity, None, eta_depth, eta_replicas, derive_seed(seed, tag::ETA, 0))?;
        (Some(e.survival_fraction), Some(e.ci_halfwidth))
    } else {
        (None, None)
    };
    let nf = n as f64;
    Ok(GiantResult {
        n,
        d,
        h,
        replicas,
        mean_c_max_fraction: rows.iter().map(|r| r.c_max as f64 / nf).sum::<f64>() / replicas as f64,
        max_c_sec_fraction: rows.iter().fold(0.0, |m, r| m.max(r.c_sec as f64 / nf)),
        eta_ref,
        eta_ci,
        rows,
    })
}

// ---------------------------------------------------------------- mesoscopic

/// Mesoscopic exponent for one graph: `c_1 = r / ln N` from the treelike
/// radius scan, then `c_1 ln(p lambda (1 - 2 delta'))`.
pub fn measured_exponent(g: &Graph, treelike_c: f64, p: f64, lambda_h: f64, delta_prime: f64) -> Result<(f64, f64), LabError> {
    let r = treelike_radius_scan(g, treelike_c, TREELIKE_RADIUS_CAP)
        .ok_or_else(|| LabError::Runtime("treelike scan found no admissible radius".into()))?;
    let c1 = r as f64 / (g.n() as f64).ln();
    let c = mesoscopic_exponent(c1, p, lambda_h, delta_prime).map_err(runtime)?;
    Ok((c1, c))
}

#[derive(Debug, Clone, Serialize)]
pub struct MesoRow {
    pub seed: u64,
    pub n: usize,
    pub c1: Option<f64>,
    pub c: f64,
    pub threshold: usize,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MesoResult {
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub p: f64,
    pub t: f64,
    pub k: f64,
    pub l: f64,
    pub lambda_h: f64,
    pub eta_ref: f64,
    pub eta_ci: f64,
    pub replicas: usize,
    /// Fraction of replicas with `count >= 0.8 eta_ref N`.
    pub hit_fraction: f64,
    pub rows: Vec<MesoRow>,
}

pub fn mesoscopic(cfg: &Config) -> Result<MesoResult, LabError> {
    let (n, d, h, p, t): (usize, usize, f64, f64, f64) = (cfg.get("n")?, cfg.get("d")?, cfg.get("h")?, cfg.get("p")?, cfg.get("t")?);
    let (replicas, seed): (usize, u64) = (cfg.get("replicas")?, cfg.get("seed")?);
    let fixed_c: Option<f64> = cfg.get_opt("c")?;
    let k = h.min(cfg.get_or("k0", -2.0)?);
    let treelike_c = cfg.get_or("treelike_c", 0.1)?;
    let delta_prime = cfg.get_or("delta_prime", 0.05)?;
    let k_max: Option<usize> = cfg.get_opt("k_max")?;
    let gc = grid(cfg)?;
    let lambda_h = lambda(d, h, 1.0, Threshold::NegInfinity, &gc).map_err(runtime)?;
    let eta = tree_eta_with(
        d,
        h,
        p,
        Threshold::NegInfinity,
        None,
        cfg.get_or("eta_depth", 20)?,
        cfg.get_or("eta_replicas", 10_000)?,
        derive_seed(seed, tag::ETA, 0),
    )?;
    let rgp = ReducedGraphParams::from_p(p, k, t).map_err(runtime)?;
    let rows: Vec<MesoRow> = ordered_map(replicas, |i| -> Result<MesoRow, LabError> {
        let s = replica_seed(seed, Experiment::Mesoscopic, i);
        let seeds = RunSeeds::from_master(s);
        let g = build_random_regular(n, d, seeds.graph).map_err(runtime)?;
        let (c1, c) = match fixed_c {
            Some(c) => (None, c),
            None => measured_exponent(&g, treelike_c, p, lambda_h, delta_prime).map(|(c1, c)| (Some(c1), c))?,
        };
        let k_max = k_max.unwrap_or_else(|| default_k_max(spectral_gap(&g)));
        let mg = MidpointGraph::new(&g);
        let (psi, mut zl) = sample_decomposition(&mg, k_max, seeds.field);
        let (psi1, _) = split_sprinkle(&mut zl, t, seeds.split, SplitMode::Conditional).map_err(runtime)?;
        let zbar = sample_zbar(n, seeds.sprinkle);
        let scan = mesoscopic_scan(&g, &psi1, &psi, &zbar, &rgp, h, c).map_err(runtime)?;
        Ok(MesoRow { seed: s, n, c1, c, threshold: scan.threshold, count: scan.count, fraction: scan.count as f64 / n as f64 })
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let target = 0.8 * eta.survival_fraction;
    let hits = rows.iter().filter(|r| r.fraction >= target).count();
    Ok(MesoResult {
        n,
        d,
        h,
        p,
        t,
        k,
        l: rgp.l,
        lambda_h,
        eta_ref: eta.survival_fraction,
        eta_ci: eta.ci_halfwidth,
        replicas,
        hit_fraction: hits as f64 / replicas.max(1) as f64,
        rows,
    })
}

// ---------------------------------------------------------------- sprinkle

#[derive(Debug, Clone, Serialize)]
pub struct SprinkleRow {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub h_prime: f64,
    pub p: f64,
    pub t: f64,
    pub c_max: usize,
    pub c_sec: usize,
    pub meso_count: usize,
    pub merged: bool,
    pub eta_ref: f64,
    pub k: f64,
    pub l: f64,
    pub c1: f64,
    pub c_meso: f64,
    pub meso_threshold: usize,
    pub meso_components: usize,
    pub merged_size: usize,
    pub merged_meso_mass: usize,
    pub centering: f64,
    pub eps: f64,
    pub beta: f64,
    pub strength_lhs: f64,
    pub strength_rhs: f64,
    pub strength_ok: bool,
    pub bad_zbar: usize,
    pub bad_floor: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SprinkleResult {
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub h_prime: f64,
    pub p: f64,
    pub t: f64,
    pub delta: f64,
    pub lambda_h_prime: f64,
    pub eta_ref: f64,
    pub eta_ci: f64,
    pub replicas: usize,
    pub merge_frequency: f64,
    pub centering_frequency: f64,
    pub rows: Vec<SprinkleRow>,
}

pub fn sprinkle(cfg: &Config) -> Result<SprinkleResult, LabError> {
    let (n, d): (usize, usize) = (cfg.get("n")?, cfg.get("d")?);
    let (h, h_prime, p): (f64, f64, f64) = (cfg.get("h")?, cfg.get("h_prime")?, cfg.get("p")?);
    let (replicas, seed): (usize, u64) = (cfg.get("replicas")?, cfg.get("seed")?);
    let t = cfg.get_or("t", default_sprinkle_strength(n))?;
    let k0 = cfg.get_or("k0", -2.0)?;
    let delta = cfg.get_or("delta", 0.2)?;
    let delta_prime = cfg.get_or("delta_prime", 0.05)?;
    let treelike_c = cfg.get_or("treelike_c", 0.1)?;
    let samples = cfg.get_or("expansion_samples", 200usize)?;
    let k_max: Option<usize> = cfg.get_opt("k_max")?;
    let gc = grid(cfg)?;
    let lambda_hp = lambda(d, h_prime, 1.0, Threshold::NegInfinity, &gc).map_err(runtime)?;
    let eta = tree_eta_with(
        d,
        h_prime,
        p,
        Threshold::NegInfinity,
        None,
        cfg.get_or("eta_depth", 20)?,
        cfg.get_or("eta_replicas", 10_000)?,
        derive_seed(seed, tag::ETA, 0),
    )?;
    let rows: Vec<SprinkleRow> = ordered_map(replicas, |i| -> Result<SprinkleRow, LabError> {
        let s = replica_seed(seed, Experiment::Sprinkle, i);
        let seeds = RunSeeds::from_master(s);
        let g = build_random_regular(n, d, seeds.graph).map_err(runtime)?;
        let (c1, c_meso) = measured_exponent(&g, treelike_c, p, lambda_hp, delta_prime)?;
        let beta = sampled_min_expansion(&g, samples, derive_seed(s, tag::EXPANSION, 0));
        let k = h.min(k0);
        let check = sprinkle_strength_check(h, k, t, c_meso, beta, delta, eta.survival_fraction, n);
        let sc = SprinkleConfig {
            h,
            h_prime,
            p,
            t,
            k0,
            delta,
            c_meso,
            eta_ref: eta.survival_fraction,
            k_max: k_max.unwrap_or_else(|| default_k_max(spectral_gap(&g))),
        };
        let rec = sprinkling_run(&g, &sc, s).map_err(runtime)?;
        Ok(SprinkleRow {
            seed: s,
            n,
            d,
            h,
            h_prime,
            p,
            t,
            c_max: rec.c_max,
            c_sec: rec.c_sec,
            meso_count: rec.meso_count,
            merged: rec.merged,
            eta_ref: rec.eta_ref,
            k: rec.k,
            l: rec.l,
            c1,
            c_meso,
            meso_threshold: rec.meso_threshold,
            meso_components: rec.meso_components,
            merged_size: rec.merged_size,
            merged_meso_mass: rec.merged_meso_mass,
            centering: rec.centering,
            eps: rec.eps,
            beta,
            strength_lhs: check.lhs,
            strength_rhs: check.rhs,
            strength_ok: check.holds(),
            bad_zbar: rec.bad_zbar,
            bad_floor: rec.bad_floor,
        })
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let frac = |pred: &dyn Fn(&SprinkleRow) -> bool| rows.iter().filter(|r| pred(r)).count() as f64 / replicas.max(1) as f64;
    Ok(SprinkleResult {
        n,
        d,
        h,
        h_prime,
        p,
        t,
        delta,
        lambda_h_prime: lambda_hp,
        eta_ref: eta.survival_fraction,
        eta_ci: eta.ci_halfwidth,
        replicas,
        merge_frequency: frac(&|r| r.merged),
        centering_frequency: frac(&|r| r.centering < r.eps),
        rows,
    })
}

// ---------------------------------------------------------------- driver

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: Experiment,
    version: &'static str,
    config: &'a Config,
    threads: Option<usize>,
    wall_time_seconds: f64,
    files: &'a [FileEntry],
}

/// Applies overrides, validates, runs `exp` and writes its files plus
/// `manifest.json` into `opts.out`. Returns the data files written.
pub fn run(exp: Experiment, cfg: &Config, opts: &RunOptions) -> Result<Vec<FileEntry>, LabError> {
    let mut cfg = cfg.clone();
    let mut problems = Vec::new();
    let takes = |key: &str| exp.keys().iter().any(|(k, _, _)| *k == key);
    for (flag, key, value) in [("--seed", "seed", opts.seed.map(|s| s.to_string())), ("--replicas", "replicas", opts.replicas.map(|r| r.to_string()))] {
        match value {
            Some(_) if !takes(key) => problems.push(format!("{flag} does not apply to `{exp}`")),
            Some(v) => cfg.set(key, v),
            None => {}
        }
    }
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems).into());
    }
    let problems = validate(exp, &cfg);
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems).into());
    }
    cfg.set("experiment", exp);
    if let Ok(n) = cfg.get::<usize>("n") {
        let dense = matches!(exp, Experiment::GreenValidate | Experiment::SamplerValidate);
        if dense && n > DENSE_LIMIT {
            return Err(ConfigError::Invalid(vec![format!("n = {n} exceeds the dense limit {DENSE_LIMIT}")]).into());
        }
    }
    let start = Instant::now();
    let mut dir = OutputDir::create(&opts.out)?;
    with_threads(opts.threads, || emit(exp, &cfg, &mut dir))?;
    let files = dir.files().to_vec();
    let manifest = Manifest {
        experiment: exp,
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        threads: opts.threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: &files,
    };
    let path = opts.out.join("manifest.json");
    std::fs::write(&path, io::json(&manifest)).map_err(|source| IoError::Fs { path, source })?;
    Ok(files)
}

fn f(v: f64) -> String {
    v.to_string()
}

fn emit(exp: Experiment, cfg: &Config, out: &mut OutputDir) -> Result<(), LabError> {
    match exp {
        Experiment::GreenValidate => {
            let r = green_validate(cfg)?;
            let n = r.n;
            out.write("graph.edges", &io::edge_list(r.graph.as_ref().expect("graph")))?;
            out.write("covariance.csv", &io::covariance_csv(n, |i, j| r.covariance[i + j * n]))?;
            out.write("green.json", &io::json(&r))?;
        }
        Experiment::SamplerValidate => {
            let r = sampler_validate(cfg)?;
            out.write("covariance_empirical.csv", &io::covariance_csv(r.n, |i, j| r.empirical(i, j)))?;
            out.write("covariance_exact.csv", &io::covariance_csv(r.n, |i, j| r.exact(i, j)))?;
            if let Some(fs) = &r.first_sample {
                out.write("field.csv", &io::field_csv(fs))?;
                out.write("field.json", &io::json(&io::field_sidecar(fs)))?;
            }
            out.write("sampler.json", &io::json(&r))?;
        }
        Experiment::TreeEta => {
            let r = tree_eta(cfg)?;
            let last = r.depth.saturating_sub(1);
            let rows = r.counts.iter().enumerate().flat_map(|(i, c)| {
                let survived = u8::from(c[last] > 0);
                c.iter().enumerate().map(move |(l, s)| format!("{i},{l},{s},{survived}"))
            });
            out.write("fronts.csv", &io::csv("replica,level,front_size,survived", rows))?;
            out.write("eta.json", &io::json(&r))?;
        }
        Experiment::OperatorSweep => {
            let rows = operator_sweep(cfg)?;
            let body = rows.iter().map(|r| format!("{},{},{},{},{}", f(r.h), f(r.p), f(r.gamma), f(r.lambda), r.n_nodes));
            out.write("lambda.csv", &io::csv("h,p,gamma,lambda,n_nodes", body))?;
        }
        Experiment::Hstar => {
            out.write("hstar.json", &io::json(&hstar(cfg)?))?;
        }
        Experiment::CouplingTail => {
            let r = coupling_tail(cfg)?;
            let body = r.rows.iter().map(|row| format!("{},{},{},{},{}", row.replica, row.r, f(r.eps), f(row.d_x), f(row.d_xprime)));
            out.write("coupling.csv", &io::csv("replica,r,eps,D_x,D_xprime", body))?;
            out.write("coupling.json", &io::json(&r))?;
        }
        Experiment::Giant => {
            let r = giant(cfg)?;
            let body = r.rows.iter().map(|g| format!("{},{},{},{},{},{},{}", g.seed, g.n, g.d, f(g.h), g.k_max, g.c_max, g.c_sec));
            out.write("giant.csv", &io::csv("seed,n,d,h,k_max,c_max,c_sec", body))?;
            out.write("giant.json", &io::json(&r))?;
        }
        Experiment::Mesoscopic => {
            let r = mesoscopic(cfg)?;
            let body = r.rows.iter().map(|m| format!("{},{},{},{},{},{}", m.seed, m.n, f(m.c), m.threshold, m.count, f(m.fraction)));
            out.write("mesoscopic.csv", &io::csv("seed,n,c,threshold,count,fraction", body))?;
            out.write("mesoscopic.json", &io::json(&r))?;
        }
        Experiment::Sprinkle => {
            let r = sprinkle(cfg)?;
            out.write("sprinkle.jsonl", &io::json_lines(&r.rows))?;
            out.write("sprinkle.json", &io::json(&r))?;
        }
    }
    Ok(())
}
