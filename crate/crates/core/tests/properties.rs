use proptest::prelude::*;
use zagff_core::graph::{build_random_regular, Graph, MidpointGraph, Topology};
use zagff_core::percolation::{components, level_components, mesoscopic_scan, ReducedGraphParams, UnionFind};
use zagff_core::sampler::{sample_decomposition, sample_zbar, split_sprinkle, SplitMode};
use zagff_core::tree::{robust_level_counts, Threshold};

fn graph_params() -> impl Strategy<Value = (usize, usize, u64)> {
    (3usize..5, 5usize..60, any::<u64>()).prop_map(|(d, n, seed)| {
        let n = if n * d % 2 == 1 { n + 1 } else { n };
        (n.max(d + 1), d, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_graphs_are_simple_regular_and_reproducible((n, d, seed) in graph_params()) {
        let g = build_random_regular(n, d, seed).unwrap();
        prop_assert_eq!(g.n(), n);
        for v in 0..n {
            let nb = g.neighbors(v);
            prop_assert_eq!(nb.len(), d);
            prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!nb.contains(&(v as u32)));
        }
        prop_assert_eq!(g.edge_count(), n * d / 2);
        prop_assert_eq!(build_random_regular(n, d, seed).unwrap(), g);
    }

    #[test]
    fn parity_vector_flips_under_the_midpoint_walk((n, d, seed) in graph_params()) {
        let g = build_random_regular(n, d, seed).unwrap();
        let mg = MidpointGraph::new(&g);
        let w: Vec<f64> = (0..mg.n_total()).map(|x| mg.parity(x)).collect();
        let mut out = vec![0.0; w.len()];
        mg.apply_walk(&w, &mut out);
        for (a, b) in out.iter().zip(&w) {
            prop_assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn union_find_partition_is_an_equivalence(edges in prop::collection::vec((0usize..40, 0usize..40), 0..80)) {
        let mut uf = UnionFind::new(40);
        for &(a, b) in &edges {
            uf.union(a, b);
        }
        for &(a, b) in &edges {
            prop_assert_eq!(uf.find(a), uf.find(b));
        }
        let roots: Vec<usize> = (0..40).filter(|&x| uf.find(x) == x).collect();
        let total: usize = roots.into_iter().map(|x| uf.class_size(x)).sum();
        prop_assert_eq!(total, 40);
    }

    #[test]
    fn level_set_components_are_monotone(seed in any::<u64>(), h in -1.0f64..1.0, dh in 0.0f64..1.0) {
        let g = build_random_regular(300, 3, seed).unwrap();
        let mg = MidpointGraph::new(&g);
        let (psi, _) = sample_decomposition(&mg, 60, seed);
        let lo = level_components(&g, &psi.values, h);
        let hi = level_components(&g, &psi.values, h + dh);
        prop_assert!(hi.c_max() <= lo.c_max());
        prop_assert!(lo.c_max() >= lo.c_sec());
        prop_assert_eq!(lo.set_size(), psi.values.iter().filter(|&&v| v >= h).count());
        prop_assert!(hi.small_fraction(&g, 4) >= lo.small_fraction(&g, 4) - 1e-15);
    }

    #[test]
    fn mesoscopic_count_shrinks_with_floors(seed in any::<u64>(), p in 0.55f64..1.0, k in -2.0f64..0.0) {
        let g = build_random_regular(400, 3, seed).unwrap();
        let mg = MidpointGraph::new(&g);
        let (psi, mut zl) = sample_decomposition(&mg, 60, seed);
        let (psi1, _) = split_sprinkle(&mut zl, 0.2, seed ^ 1, SplitMode::Conditional).unwrap();
        let zbar = sample_zbar(400, seed ^ 2);
        let base = ReducedGraphParams::from_p(p, k, 0.2).unwrap();
        let higher_l = ReducedGraphParams { l: base.l + 0.3, ..base };
        let higher_k = ReducedGraphParams { k: base.k + 0.3, ..base };
        let count = |r: &ReducedGraphParams| mesoscopic_scan(&g, &psi1, &psi, &zbar, r, -0.2, 0.2).unwrap().count;
        let c0 = count(&base);
        prop_assert!(count(&higher_l) <= c0);
        prop_assert!(count(&higher_k) <= c0);
        prop_assert!(c0 <= count(&ReducedGraphParams::vacuous(0.2)));
    }

    #[test]
    fn robust_counts_shrink_with_constraints(seed in any::<u64>(), h in -1.0f64..1.5, gamma in -1.0f64..2.0) {
        let plain = robust_level_counts(3, seed, seed, h, 1.0, Threshold::NegInfinity, 6);
        let thinned = robust_level_counts(3, seed, seed, h, 0.7, Threshold::NegInfinity, 6);
        let robust = robust_level_counts(3, seed, seed, h, 0.7, Threshold::Finite(gamma), 6);
        for l in 0..=6 {
            prop_assert!(thinned[l] <= plain[l]);
            prop_assert!(robust[l] <= thinned[l]);
        }
    }
}

#[test]
fn full_set_is_one_component() {
    let g: Graph = build_random_regular(1000, 3, 1).unwrap();
    let s = components(&g, &vec![true; 1000]);
    assert_eq!(s.sizes, vec![1000]);
}
