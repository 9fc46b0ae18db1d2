//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use sis_core::Graph;

/// Largest eigenvalue of the symmetric adjacency matrix by dense
/// decomposition.
pub fn dense_lambda1(g: &Graph) -> f64 {
    assert!(!g.is_directed());
    let n = g.n();
    let a = DMatrix::from_fn(n, n, |v, u| if g.has_arc(u, v) { 1.0 } else { 0.0 });
    a.symmetric_eigen().eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-step, per-node infection marginals of the synchronous stochastic
/// process, computed by evolving the full distribution over all `2^n`
/// states. `gamma(k)` and `beta(k)` are the rates used on step `k`.
pub fn exact_marginals(
    g: &Graph,
    initial: &[usize],
    steps: usize,
    gamma: impl Fn(usize) -> f64,
    beta: impl Fn(usize) -> f64,
) -> Vec<Vec<f64>> {
    let n = g.n();
    assert!(n <= 12, "state space too large");
    let states = 1usize << n;
    let mut dist = vec![0.0; states];
    dist[initial.iter().fold(0, |s, &v| s | (1 << v))] = 1.0;

    let marginals = |dist: &[f64]| -> Vec<f64> {
        (0..n).map(|v| dist.iter().enumerate().filter(|(s, _)| s >> v & 1 == 1).map(|(_, p)| p).sum()).collect()
    };
    let mut out = vec![marginals(&dist)];
    for k in 0..steps {
        let (gm, bt) = (gamma(k), beta(k));
        let mut next = vec![0.0; states];
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            // Probability each node is infected after the step, given s.
            let q: Vec<f64> = (0..n)
                .map(|v| {
                    if s >> v & 1 == 1 {
                        1.0 - bt
                    } else {
                        let k_inf = (0..n).filter(|&u| s >> u & 1 == 1 && g.has_arc(u, v)).count();
                        1.0 - (1.0 - gm).powi(k_inf as i32)
                    }
                })
                .collect();
            for (t, slot) in next.iter_mut().enumerate() {
                let pt: f64 = (0..n).map(|v| if t >> v & 1 == 1 { q[v] } else { 1.0 - q[v] }).product();
                *slot += p * pt;
            }
        }
        dist = next;
        out.push(marginals(&dist));
    }
    out
}

/// Random graphs with up to `max_n` nodes.
pub fn small_graph(max_n: usize, directed: bool) -> impl Strategy<Value = Graph> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), proptest::collection::vec((0..n, 0..n), 0..3 * n)))
        .prop_map(move |(n, edges)| Graph::from_edges(n, &edges, directed).unwrap())
}
