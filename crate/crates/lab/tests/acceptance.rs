//! Acceptance criteria, one test each. Every test writes a single
//! `PASS`/`FAIL` line to stderr (bypassing output capture) before asserting.
//!
//! Run with `cargo test -p zagff --test acceptance -- --include-ignored`
//! to include the criteria that do not hold at desk scale.

use std::io::Write as _;
use std::time::{Duration, Instant};

use zagff::config::{Config, Experiment};
use zagff::experiments::{
    coupling_tail, giant, hstar_with, mesoscopic, run, sampler_validate, sprinkle, tree_eta_with, RunOptions,
};
use zagff_core::graph::build_random_regular;
use zagff_core::operator::{apply_by_simulation, build_operator, lambda, GridConfig};
use zagff_core::stats::CovAccumulator;
use zagff_core::tree::{prune_field, sample_tree, Threshold};
use zagff_core::walk::{covariance_table, zero_average_green};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {verdict}  {title}: {detail}");
}

fn config(lines: &[(&str, String)]) -> Config {
    let mut c = Config::default();
    for (k, v) in lines {
        c.set(k, v);
    }
    c
}

macro_rules! cfg {
    ($($k:ident = $v:expr),* $(,)?) => {
        config(&[$((stringify!($k), $v.to_string())),*])
    };
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

#[test]
fn criterion_01_green_oracle() {
    let start = Instant::now();
    let g = build_random_regular(4, 3, 0).unwrap();
    let gt = zero_average_green(&g).unwrap();
    let cov = covariance_table(&gt);
    let mut worst: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    let mut worst_row: f64 = 0.0;
    for x in 0..4 {
        let mut row = 0.0;
        for y in 0..4 {
            let (want, want_cov) = if x == y { (9.0 / 8.0, 9.0 / 16.0) } else { (-3.0 / 8.0, -3.0 / 16.0) };
            worst = worst.max((gt.green(x, y) - want).abs());
            worst_cov = worst_cov.max((cov[(x, y)] - want_cov).abs());
            row += gt.green(x, y);
        }
        worst_row = worst_row.max(row.abs());
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-9 && worst_cov < 1e-9 && worst_row < 1e-9 && within(elapsed, 1);
    let detail = format!("max |G - oracle| = {worst:.1e}, max |cov - oracle| = {worst_cov:.1e}, max |row sum| = {worst_row:.1e}, {elapsed:.2?}");
    report(1, "Green function on K4", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
#[ignore = "unattainable at 10^5 replicas: entrywise Monte Carlo error at N = 64 exceeds 0.01; see the decisions ledger"]
fn criterion_02_decomposition_covariance() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for n in [4usize, 64] {
        let r = sampler_validate(&cfg!(n = n, d = 3, seed = 2024, replicas = 100_000)).unwrap();
        let ok = r.max_abs_diff <= 0.01 && r.max_abs_sum <= 1e-9 * n as f64;
        pass &= ok;
        // standard error of a Gaussian sample covariance entry
        let se = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| ((r.exact(i, i) * r.exact(j, j) + r.exact(i, j).powi(2)) / r.replicas as f64).sqrt())
            .fold(0.0, f64::max);
        details.push(format!(
            "N={n}: max entry gap {:.4} (largest standard error {se:.4}, truncation {:.1e}), max |sum| {:.1e}",
            r.max_abs_diff,
            r.truncation_max_abs_diff.unwrap_or(f64::NAN),
            r.max_abs_sum
        ));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 120);
    let detail = format!("{}; {elapsed:.1?}", details.join("; "));
    report(2, "decomposition sampler covariance", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_conditional_sprinkle_law() {
    let start = Instant::now();
    let (d, depth, t, replicas) = (3usize, 8usize, 0.3f64, 100_000u64);
    let ts0 = sample_tree(d, depth, 0).unwrap();
    let inner = ts0.layout.ball_len(depth - 1);
    let neighbours: Vec<Vec<usize>> = (0..inner)
        .map(|v| ts0.parent_of(v).into_iter().chain(ts0.layout.children_of(v)).collect())
        .collect();
    // residual and field at: root, a child, a grandchild, and a vertex on another branch
    let picks = [0, ts0.index(1, 0), ts0.index(2, 0), ts0.index(3, 5)];
    let mut acc = CovAccumulator::new(2 * picks.len());
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let half_t2 = t * t / 2.0;
    for s in 0..replicas {
        let mut ts = sample_tree(d, depth, s).unwrap();
        prune_field(&mut ts, t, s ^ 0x5EED).unwrap();
        let phi2 = ts.phi2.as_ref().unwrap();
        let mut psi_at = [0.0; 4];
        let mut phi_at = [0.0; 4];
        for v in 0..inner {
            let u = ts.phi[v] - neighbours[v].iter().map(|&z| ts.phi[z]).sum::<f64>() / d as f64;
            sxy += phi2[v] * u;
            sxx += u * u;
            if let Some(k) = picks.iter().position(|&p| p == v) {
                psi_at[k] = phi2[v] - half_t2 * u;
                phi_at[k] = ts.phi[v];
            }
        }
        let row: Vec<f64> = psi_at.iter().chain(&phi_at).copied().collect();
        acc.push(&row);
    }
    let slope = sxy / sxx;
    let slope_err = (slope / half_t2 - 1.0).abs();
    let bound = 3.0 / (replicas as f64).sqrt();
    let mut worst_corr: f64 = 0.0;
    for a in 0..4 {
        for b in 4..8 {
            worst_corr = worst_corr.max(acc.corr(a, b).abs());
        }
    }
    let var_want = half_t2 - t.powi(4) / 4.0;
    let var_err = (0..4).map(|a| (acc.cov(a, a) / var_want - 1.0).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = slope_err <= 0.02 && worst_corr <= bound && var_err <= 0.02 && within(elapsed, 300);
    let detail = format!(
        "slope {slope:.5} vs {half_t2} (rel {slope_err:.4}), max |corr(psi, phi)| {worst_corr:.4} <= {bound:.4}, Var psi rel err {var_err:.4}, {elapsed:.1?}"
    );
    report(3, "conditional law of the sprinkle part", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_operator_sanity() {
    let start = Instant::now();
    let d = 3;
    let gc = GridConfig::default();
    let plain = |h: f64| lambda(d, h, 1.0, Threshold::NegInfinity, &gc).unwrap();
    let low = plain(-8.0);
    let grid: Vec<f64> = (0..=24).map(|i| -8.0 + 0.5 * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&h| plain(h)).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let (h, p) = (0.0, 0.9);
    let target = p * plain(h);
    let limit: Vec<f64> = [-2.0, -5.0, -10.0, -20.0]
        .iter()
        .map(|&g| lambda(d, h, p, Threshold::Finite(g), &gc).unwrap())
        .collect();
    let limit_gap = (limit.last().unwrap() - target).abs();
    let mut kernel_err: f64 = 0.0;
    for gamma in [Threshold::NegInfinity, Threshold::Finite(0.4)] {
        let og = build_operator(d, 0.2, 0.8, gamma, gc.n_nodes, gc.h_max_sigmas).unwrap();
        let f = |y: f64| 1.0 + 0.5 * y;
        let lf = og.apply(&og.nodes.iter().map(|&y| f(y)).collect::<Vec<_>>());
        for i in [10, 60, 120] {
            let mc = apply_by_simulation(d, 0.2, 0.8, gamma, og.nodes[i], f, 400_000, i as u64);
            kernel_err = kernel_err.max((mc - lf[i]).abs() / lf[i].abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = (low - 2.0).abs() < 1e-3 && decreasing && limit_gap < 1e-3 && kernel_err < 0.01 && within(elapsed, 120);
    let detail = format!(
        "lambda(-8) = {low:.6}, strictly decreasing on {} levels: {decreasing}, |lambda(gamma=-20) - p lambda| = {limit_gap:.1e}, kernel MC rel err {kernel_err:.4}, {elapsed:.1?}",
        grid.len()
    );
    report(4, "operator sanity", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_critical_level() {
    let start = Instant::now();
    let coarse = hstar_with(3, 256, 1e-6).unwrap().h_star;
    let fine = hstar_with(3, 512, 1e-6).unwrap().h_star;
    let gc = GridConfig::default();
    let mut consistent = true;
    let mut notes = Vec::new();
    for dh in [-0.2, 0.2] {
        let h = coarse + dh;
        let lam = lambda(3, h, 1.0, Threshold::NegInfinity, &gc).unwrap();
        let e = tree_eta_with(3, h, 1.0, Threshold::NegInfinity, None, 20, 20_000, 77).unwrap();
        // the mean front grows like lambda^k, so its trend over the second
        // half of the tree gives the Monte Carlo classification
        let grows = e.mean_front[19] > e.mean_front[10];
        consistent &= grows == (lam > 1.0);
        notes.push(format!("h={h:.3}: lambda {lam:.4}, front {:.3} -> {:.3}, survival {:.4}", e.mean_front[10], e.mean_front[19], e.survival_fraction));
    }
    let elapsed = start.elapsed();
    let pass = coarse > 0.0 && (coarse - fine).abs() < 1e-3 && consistent && within(elapsed, 600);
    let detail = format!("h* = {coarse:.6} (256 nodes), {fine:.6} (512 nodes); {}; {elapsed:.1?}", notes.join("; "));
    report(5, "critical level", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
#[ignore = "unattainable at N = 10^4: no 8-treelike vertices for r = 4; see the decisions ledger"]
fn criterion_06_coupling() {
    let start = Instant::now();
    let r = coupling_tail(&cfg!(n = 10_000, d = 3, seed = 2024, r = "2,3,4", eps = 2.5, replicas = 1000)).unwrap();
    let all_pairs = r.radii.iter().all(|c| c.pair.is_some());
    let found: Vec<_> = r.radii.iter().filter(|c| c.pair.is_some()).collect();
    let sharing = !found.is_empty() && found.iter().all(|c| c.sharing_ok);
    let identity = !found.is_empty() && found.iter().all(|c| c.max_identity_error <= 1e-9);
    let tails: Vec<Option<f64>> = r.radii.iter().map(|c| c.tail_fraction).collect();
    let decreasing = all_pairs && tails.windows(2).all(|w| w[1] < w[0]);
    let elapsed = start.elapsed();
    let pass = all_pairs && sharing && identity && decreasing && within(elapsed, 600);
    let detail = format!(
        "pairs found {:?}, sharing {sharing} and identity {identity} where found, tail fractions at eps {} {:?}, {elapsed:.1?}",
        r.radii.iter().map(|c| (c.r, c.pair.is_some())).collect::<Vec<_>>(),
        r.eps,
        tails
    );
    report(6, "graph-tree coupling", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_giant_component() {
    let start = Instant::now();
    let sup = giant(&cfg!(n = 20_000, d = 3, h = 0, replicas = 20, seed = 2024, eta_depth = 20, eta_replicas = 100_000)).unwrap();
    let eta = sup.eta_ref.unwrap();
    let sup_ok = (sup.mean_c_max_fraction - eta).abs() <= 0.1 && sup.max_c_sec_fraction <= 0.05;
    let h_sub = hstar_with(3, 256, 1e-6).unwrap().h_star + 0.5;
    let mut fractions = Vec::new();
    for n in [5_000usize, 10_000, 20_000] {
        let r = giant(&cfg!(n = n, d = 3, h = h_sub, replicas = 10, seed = 2024, eta_replicas = 0)).unwrap();
        fractions.push(r.mean_c_max_fraction);
    }
    let sub_small = fractions[2] <= 0.01;
    let sublinear = fractions.windows(2).all(|w| w[1] < w[0]);
    let elapsed = start.elapsed();
    let pass = sup_ok && sub_small && sublinear && within(elapsed, 1800);
    let detail = format!(
        "h=0: mean c_max/N {:.4} vs eta {eta:.4}, max c_sec/N {:.4}; h={h_sub:.3}: c_max/N {fractions:.4?}; {elapsed:.1?}",
        sup.mean_c_max_fraction, sup.max_c_sec_fraction
    );
    report(7, "giant component", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_mesoscopic_components() {
    let start = Instant::now();
    let r = mesoscopic(&cfg!(n = 20_000, d = 3, h = 0, p = 0.95, t = 0.1, replicas = 20, seed = 2024, eta_replicas = 100_000))
        .unwrap();
    let elapsed = start.elapsed();
    let pass = r.hit_fraction >= 0.8 && within(elapsed, 1200);
    let fractions: Vec<f64> = r.rows.iter().map(|m| m.fraction).collect();
    let detail = format!(
        "eta(0, 0.95) = {:.4}, target 0.8 eta = {:.4}, exponent c = {:.4}, hit in {:.0}% of seeds (min fraction {:.4}), {elapsed:.1?}",
        r.eta_ref,
        0.8 * r.eta_ref,
        r.rows[0].c,
        100.0 * r.hit_fraction,
        fractions.iter().copied().fold(f64::INFINITY, f64::min)
    );
    report(8, "mesoscopic components", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_sprinkling_merge() {
    let start = Instant::now();
    let mut freq = Vec::new();
    for n in [5_000usize, 10_000, 20_000] {
        let r = sprinkle(&cfg!(n = n, d = 3, h = 0, h_prime = 0.2, p = 0.95, replicas = 20, seed = 2024, eta_replicas = 100_000))
            .unwrap();
        freq.push(r.merge_frequency);
    }
    let elapsed = start.elapsed();
    let pass = freq.windows(2).all(|w| w[1] >= w[0]) && freq[2] >= 0.9 && within(elapsed, 1800);
    let detail = format!("merge frequency at N = 5e3, 1e4, 2e4: {freq:?}, {elapsed:.1?}");
    report(9, "sprinkling merge", pass, &detail);
    assert!(pass, "{detail}");
}

fn small_config(exp: Experiment) -> Config {
    match exp {
        Experiment::GreenValidate => cfg!(n = 40, d = 3, seed = 5),
        Experiment::SamplerValidate => cfg!(n = 20, d = 3, seed = 5, replicas = 2500),
        Experiment::TreeEta => cfg!(d = 3, h = 0.1, depth = 10, replicas = 500, seed = 5, p = 0.9, gamma = 0.2),
        Experiment::OperatorSweep => cfg!(d = 3, h_min = -1, h_max = 2, h_steps = 4, n_nodes = 64),
        Experiment::Hstar => cfg!(d = 4, n_nodes = 64, tol = 1e-4),
        Experiment::CouplingTail => cfg!(n = 600, d = 3, seed = 5, r = "1,2", eps = 1.0, replicas = 6),
        Experiment::Giant => cfg!(n = 800, d = 3, h = 0.1, replicas = 3, seed = 5, eta_replicas = 200, eta_depth = 8),
        Experiment::Mesoscopic => cfg!(n = 800, d = 3, h = 0, p = 0.95, t = 0.1, replicas = 3, seed = 5, eta_replicas = 200, eta_depth = 8),
        Experiment::Sprinkle => cfg!(n = 800, d = 3, h = 0, h_prime = 0.2, p = 0.95, replicas = 3, seed = 5, eta_replicas = 200, eta_depth = 8),
    }
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut files = 0;
    for exp in Experiment::ALL {
        let cfg = small_config(exp);
        let runs: Vec<_> = [Some(1), Some(3), Some(1)]
            .into_iter()
            .enumerate()
            .map(|(i, threads)| {
                let out = dir.path().join(format!("{exp}-{i}"));
                let listed = run(exp, &cfg, &RunOptions { threads, out: out.clone(), ..RunOptions::default() }).unwrap();
                let bytes: Vec<(String, Vec<u8>)> =
                    listed.iter().map(|f| (f.path.clone(), std::fs::read(out.join(&f.path)).unwrap())).collect();
                bytes
            })
            .collect();
        files += runs[0].len();
        if runs.iter().any(|r| r != &runs[0]) {
            mismatches.push(exp.to_string());
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty();
    let detail = format!("{files} data files across {} experiments, 3 runs each (1, 3, 1 threads), differing: {mismatches:?}, {elapsed:.1?}", Experiment::ALL.len());
    report(10, "determinism", pass, &detail);
    assert!(pass, "{detail}");
}
