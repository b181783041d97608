use zagff_core::operator::{apply_by_simulation, build_operator, principal_eigen, GridConfig};
use zagff_core::stats::CovAccumulator;
use zagff_core::tree::{prune_field, robust_component, robust_level_counts, sample_tree, tree_green, Threshold};

#[test]
fn tree_covariance_matches_green_function() {
    let ts0 = sample_tree(3, 3, 0).unwrap();
    // root, a child, a grandchild on the same ray, and a grandchild on another ray
    let picks = [0, ts0.index(1, 0), ts0.index(2, 0), ts0.index(2, 3), ts0.index(3, 0)];
    let mut acc = CovAccumulator::new(picks.len());
    for s in 0..60_000 {
        let ts = sample_tree(3, 3, s).unwrap();
        let v: Vec<f64> = picks.iter().map(|&i| ts.phi[i]).collect();
        acc.push(&v);
    }
    for (a, &i) in picks.iter().enumerate() {
        for (b, &j) in picks.iter().enumerate() {
            let want = tree_green(3, ts0.distance(i, j));
            assert!((acc.cov(a, b) - want).abs() < 0.04, "{i} {j}: {} vs {want}", acc.cov(a, b));
        }
    }
}

#[test]
fn sprinkle_part_is_independent_of_the_pruned_field() {
    let t = 0.5;
    let depth = 4;
    let ts0 = sample_tree(3, depth, 0).unwrap();
    let x = ts0.index(1, 1);
    let y = ts0.index(2, 2);
    let mut acc = CovAccumulator::new(4);
    for s in 0..40_000 {
        let mut ts = sample_tree(3, depth, s).unwrap();
        prune_field(&mut ts, t, s ^ 0xABCD).unwrap();
        let (p1, p2) = (ts.phi1.unwrap(), ts.phi2.unwrap());
        acc.push(&[p1[x], p2[x], p1[y], p2[y]]);
    }
    // phi^2 = t Z^2 with Z^2 i.i.d. N(0, 1/2); phi^1 independent of it
    assert!((acc.cov(1, 1) - t * t / 2.0).abs() < 0.01);
    assert!((acc.cov(3, 3) - t * t / 2.0).abs() < 0.01);
    assert!(acc.cov(1, 3).abs() < 0.01);
    for (a, b) in [(0, 1), (0, 3), (2, 1), (2, 3)] {
        assert!(acc.cov(a, b).abs() < 0.015, "{a} {b}: {}", acc.cov(a, b));
    }
    let want = tree_green(3, 0) - t * t / 2.0;
    assert!((acc.cov(0, 0) - want).abs() < 0.05);
}

#[test]
fn robust_component_on_materialised_tree_matches_lazy_counts() {
    for s in 0..50 {
        let ts = sample_tree(3, 8, s).unwrap();
        let c = robust_component(&ts, 0.0, 0.9, Threshold::Finite(0.3), s + 1);
        let lazy = robust_level_counts(3, s, s + 1, 0.0, 0.9, Threshold::Finite(0.3), 7);
        assert_eq!(c.level_counts, lazy);
    }
}

#[test]
fn eigenpair_residual_and_variational_bound() {
    let robust = build_operator(3, 0.3, 0.9, Threshold::Finite(-0.5), 128, 8.0).unwrap();
    let e = principal_eigen(&robust, 1e-13, 100_000).unwrap();
    assert!(e.residual < 1e-6, "{}", e.residual);
    assert!(e.chi.iter().all(|&c| c > 0.0));

    // without the children-sum constraint the operator is self-adjoint in L^2(nu)
    let og = build_operator(3, 0.3, 0.9, Threshold::NegInfinity, 128, 8.0).unwrap();
    let e = principal_eigen(&og, 1e-13, 100_000).unwrap();
    assert!(e.residual < 1e-6, "{}", e.residual);
    for i in (0..128).step_by(7) {
        for j in (0..128).step_by(11) {
            let (a, b) = (og.kernel(i, j), og.kernel(j, i));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-300));
        }
    }
    // Rayleigh quotients never exceed the principal eigenvalue
    for k in 0..5 {
        let f: Vec<f64> = og.nodes.iter().map(|a| 1.0 + (k as f64 * a).sin() + 0.1 * a * a).collect();
        let lf = og.apply(&f);
        let q = og.inner(&f, &lf) / og.inner(&f, &f);
        assert!(q <= e.lambda + 1e-10);
    }
}

#[test]
fn kernel_agrees_with_direct_simulation() {
    let cfg = GridConfig { n_nodes: 256, ..GridConfig::default() };
    for gamma in [Threshold::NegInfinity, Threshold::Finite(0.4)] {
        let og = build_operator(3, 0.2, 0.8, gamma, cfg.n_nodes, cfg.h_max_sigmas).unwrap();
        let f = |y: f64| 1.0 + 0.5 * y;
        let fv: Vec<f64> = og.nodes.iter().map(|&y| f(y)).collect();
        let lf = og.apply(&fv);
        for i in [10, 60, 120] {
            let a = og.nodes[i];
            let mc = apply_by_simulation(3, 0.2, 0.8, gamma, a, f, 400_000, i as u64);
            assert!((mc - lf[i]).abs() < 0.01 * lf[i].abs().max(0.1), "a = {a}: {mc} vs {}", lf[i]);
        }
    }
}
