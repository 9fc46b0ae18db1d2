mod common;

use common::{dense_lambda1, small_graph};
use proptest::prelude::*;
use sis_core::graph::generators::{complete, cycle, gnp, path, star};
use sis_core::Graph;

#[test]
fn random_graphs_match_dense_decomposition() {
    for seed in 0..20u64 {
        let n = 10 + (seed as usize * 7) % 41;
        let p = 0.05 + 0.02 * (seed % 10) as f64;
        let g = gnp(n, p, seed);
        let got = g.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
        let want = dense_lambda1(&g);
        assert!((got - want).abs() < 1e-8, "n={n} p={p}: {got} vs {want}");
    }
}

#[test]
fn path_spectrum_closed_form() {
    // λ₁(P_n) = 2cos(π/(n+1)).
    for n in [2usize, 3, 7, 20] {
        let want = 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let got = path(n).largest_eigenvalue(1e-13, 1_000_000).unwrap().lambda1;
        assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
    }
}

#[test]
fn cycles_and_families() {
    for n in [3usize, 4, 9, 10] {
        let l = cycle(n).largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
        assert!((l - 2.0).abs() < 1e-9);
    }
    for n in [4usize, 10, 50] {
        assert!((complete(n).largest_eigenvalue(1e-12, 100_000).unwrap().lambda1 - (n - 1) as f64).abs() < 1e-9);
        let s = star(n - 1).largest_eigenvalue(1e-12, 100_000).unwrap().lambda1;
        assert!((s - ((n - 1) as f64).sqrt()).abs() < 1e-9);
    }
}

#[test]
fn directed_reversal_keeps_radius() {
    // A and Aᵀ share a spectrum.
    let edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 1)];
    let fwd = Graph::from_edges(4, &edges, true).unwrap();
    let rev: Vec<_> = edges.iter().map(|&(u, v)| (v, u)).collect();
    let bwd = Graph::from_edges(4, &rev, true).unwrap();
    let a = fwd.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
    let b = bwd.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    // Two 3-cycles sharing the arc 1→2: characteristic polynomial x⁴ − 2x.
    assert!((a - 2f64.cbrt()).abs() < 1e-9, "{a}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radius_matches_dense_on_small_graphs(g in small_graph(12, false)) {
        let got = g.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
        prop_assert!((got - dense_lambda1(&g)).abs() < 1e-7);
    }

    #[test]
    fn radius_between_mean_and_max_degree(g in small_graph(15, false)) {
        let l = g.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
        let degs: Vec<f64> = (0..g.n()).map(|v| g.in_degree(v) as f64).collect();
        let mean = degs.iter().sum::<f64>() / degs.len() as f64;
        let max = degs.iter().copied().fold(0.0, f64::max);
        prop_assert!(l >= mean - 1e-8 && l <= max + 1e-8, "{} not in [{}, {}]", l, mean, max);
    }

    #[test]
    fn relabelling_preserves_radius(g in small_graph(10, false), shift in 0usize..10) {
        let n = g.n();
        let edges: Vec<_> = (0..n)
            .flat_map(|v| g.in_neighbors(v).iter().map(move |&u| ((u + shift) % n, (v + shift) % n)).collect::<Vec<_>>())
            .collect();
        let h = Graph::from_edges(n, &edges, false).unwrap();
        let a = g.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
        let b = h.largest_eigenvalue(1e-12, 1_000_000).unwrap().lambda1;
        prop_assert!((a - b).abs() < 1e-8);
    }
}
