//! Spreading network: a static adjacency over `n` nodes stored as
//! compressed in-neighbour lists, plus its dominant eigenvalue.
//!
//! An edge `(u, v)` means `u` can infect `v`, i.e. `a_vu = 1`. For every node
//! `v` the graph keeps the set `{u : a_vu = 1}` contiguously, which is the
//! access pattern of the infection-pressure product.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge list contains no edges")]
    Empty,
    #[error("graph has no nodes")]
    NoNodes,
    #[error("node index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("power iteration did not converge in {iterations} iterations (last estimate {last_estimate}, residual {residual:e})")]
    NoConvergence { iterations: usize, last_estimate: f64, residual: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Immutable sparse adjacency. Self-loops are never stored and each arc
/// appears once.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    offsets: Vec<usize>,
    in_nbrs: Vec<usize>,
    labels: Vec<u64>,
    self_loops_dropped: usize,
}

impl Graph {
    /// Builds a graph from `(u, v)` arcs over nodes `0..n`. Undirected graphs
    /// are symmetrised; duplicates are collapsed and self-loops dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self, GraphError> {
        let labels = (0..n as u64).collect();
        Self::build(n, edges.iter().copied(), directed, labels)
    }

    fn build(n: usize, edges: impl Iterator<Item = (usize, usize)>, directed: bool, labels: Vec<u64>) -> Result<Self, GraphError> {
        // (target, source) pairs, sorted so each target's sources are contiguous.
        let mut arcs: Vec<(usize, usize)> = Vec::new();
        let mut self_loops = 0;
        for (u, v) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(GraphError::IndexOutOfRange { index: idx, n });
                }
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            arcs.push((v, u));
            if !directed {
                arcs.push((u, v));
            }
        }
        arcs.sort_unstable();
        arcs.dedup();

        let mut offsets = vec![0usize; n + 1];
        for &(v, _) in &arcs {
            offsets[v + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let in_nbrs = arcs.into_iter().map(|(_, u)| u).collect();
        Ok(Graph { n, directed, offsets, in_nbrs, labels, self_loops_dropped: self_loops })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored arcs (an undirected edge counts twice).
    pub fn arc_count(&self) -> usize {
        self.in_nbrs.len()
    }

    /// Number of edges as given: arcs for directed graphs, arc pairs otherwise.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.arc_count()
        } else {
            self.arc_count() / 2
        }
    }

    /// Sources `u` with `a_vu = 1`, sorted ascending.
    #[inline]
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_nbrs[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Original identifier of dense node `v` as it appeared in the input.
    pub fn label(&self, v: usize) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.in_neighbors(v).binary_search(&u).is_ok()
    }

    /// `y = A x`, i.e. `y_v = sum_{u in N_in(v)} x_u`.
    pub fn mul_adjacency(&self, x: &[f64], y: &mut [f64]) {
        for (v, yv) in y.iter_mut().enumerate() {
            *yv = self.in_neighbors(v).iter().map(|&u| x[u]).sum();
        }
    }

    /// Dominant eigenvalue of the adjacency matrix by power iteration.
    ///
    /// Iterates on `A + I` from the all-ones vector; the unit shift separates
    /// `+λ₁` from `-λ₁` on bipartite graphs. Symmetric graphs use the Rayleigh
    /// quotient, directed ones the 1-norm growth ratio of the nonnegative
    /// iterate. Converged when both the change in the estimate and the
    /// residual `‖Ax − λx‖₁ / ‖x‖₁` are at most `tol`.
    pub fn largest_eigenvalue(&self, tol: f64, max_iter: usize) -> Result<SpectralResult, GraphError> {
        if self.n == 0 {
            return Err(GraphError::NoNodes);
        }
        if !(tol > 0.0) {
            return Err(GraphError::BadTolerance(tol));
        }
        const SHIFT: f64 = 1.0;
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut y = vec![0.0; n];
        let mut prev = f64::NAN;
        let mut estimate = 0.0;
        let mut residual = f64::INFINITY;

        for iter in 1..=max_iter {
            self.mul_adjacency(&x, &mut y);
            for (yv, xv) in y.iter_mut().zip(&x) {
                *yv += SHIFT * xv;
            }
            let x_norm: f64 = x.iter().sum();
            let shifted = if self.directed {
                y.iter().sum::<f64>() / x_norm
            } else {
                let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                let xx: f64 = x.iter().map(|a| a * a).sum();
                xy / xx
            };
            residual = x.iter().zip(&y).map(|(xv, yv)| (yv - shifted * xv).abs()).sum::<f64>() / x_norm;
            estimate = shifted - SHIFT;

            if (estimate - prev).abs() <= tol && residual <= tol {
                return Ok(SpectralResult { lambda1: estimate.max(0.0), iterations: iter, residual });
            }
            prev = estimate;

            let y_norm: f64 = y.iter().sum();
            for (xv, yv) in x.iter_mut().zip(&y) {
                *xv = yv / y_norm;
            }
        }
        Err(GraphError::NoConvergence { iterations: max_iter, last_estimate: estimate, residual })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralResult {
    pub lambda1: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Parses a whitespace-separated edge list, one `u v` pair per line.
///
/// Lines starting with `#` are comments. An optional `n=<count>` header line
/// fixes the node count and makes the indices dense as given (they must lie in
/// `0..count`). Without it, the distinct identifiers are remapped to `0..n` in
/// ascending order, so inputs already numbered `0..n` keep their indices.
pub fn load_edge_list(text: &str, directed: bool) -> Result<Graph, GraphError> {
    let mut header_n: Option<usize> = None;
    let mut raw: Vec<(u64, u64, usize)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n=") {
            if header_n.is_some() || !raw.is_empty() {
                return Err(GraphError::Parse { line: lineno, msg: "header `n=<count>` must appear once, before any edge".into() });
            }
            let n = rest
                .trim()
                .parse::<usize>()
                .map_err(|e| GraphError::Parse { line: lineno, msg: format!("bad node count `{}`: {e}", rest.trim()) })?;
            header_n = Some(n);
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut next_id = |what: &str| -> Result<u64, GraphError> {
            let tok = tokens.next().ok_or_else(|| GraphError::Parse { line: lineno, msg: format!("missing {what} node") })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse { line: lineno, msg: format!("`{tok}` is not a node index") })
        };
        let u = next_id("source")?;
        let v = next_id("target")?;
        if let Some(extra) = tokens.next() {
            return Err(GraphError::Parse { line: lineno, msg: format!("unexpected trailing token `{extra}`") });
        }
        raw.push((u, v, lineno));
    }

    if raw.is_empty() {
        return Err(GraphError::Empty);
    }

    let graph = match header_n {
        Some(n) => {
            for &(u, v, line) in &raw {
                for id in [u, v] {
                    if id as usize >= n {
                        return Err(GraphError::Parse { line, msg: format!("node {id} out of range for n={n}") });
                    }
                }
            }
            let labels = (0..n as u64).collect();
            Graph::build(n, raw.iter().map(|&(u, v, _)| (u as usize, v as usize)), directed, labels)?
        }
        None => {
            let ids: BTreeSet<u64> = raw.iter().flat_map(|&(u, v, _)| [u, v]).collect();
            let labels: Vec<u64> = ids.into_iter().collect();
            let dense = |id: u64| labels.binary_search(&id).expect("id collected above");
            let edges: Vec<(usize, usize)> = raw.iter().map(|&(u, v, _)| (dense(u), dense(v))).collect();
            Graph::build(labels.len(), edges.into_iter(), directed, labels)?
        }
    };
    if graph.self_loops_dropped > 0 {
        log::warn!("dropped {} self-loop(s) from edge list", graph.self_loops_dropped);
    }
    Ok(graph)
}

/// Small deterministic graph families used by tests and the CLI.
pub mod generators {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::Graph;

    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Graph::from_edges(n, &edges, false).expect("indices in range")
    }

    /// Hub `0` joined to `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Graph::from_edges(leaves + 1, &edges, false).expect("indices in range")
    }

    pub fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        Graph::from_edges(n, &edges, false).expect("indices in range")
    }

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Graph::from_edges(n, &edges, false).expect("indices in range")
    }

    /// Erdős–Rényi G(n, p), undirected.
    pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(n, &edges, false).expect("indices in range")
    }

    /// A cycle overlaid with G(n, p) chords: connected, minimum degree 2.
    pub fn ring_gnp(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(n, &edges, false).expect("indices in range")
    }
}
