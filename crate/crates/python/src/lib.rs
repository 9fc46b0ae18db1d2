//! Python bindings: graphs, schedules, the master equation, the simulator,
//! the adaptive controllers and their bounds.

use std::fmt::Display;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sis_core::config::{parse_config, Mode};
use sis_core::control::{self, ControlOptions, Prop2Inputs};
use sis_core::dynamics::{self, IntegrateOptions, MleOptions};
use sis_core::graph::generators;
use sis_core::simulate::{self as sim, SimConfig};
use sis_core::{
    BetaSchedule, ContainController, ContainParams, DieOutController, InfectionState, Method, NodeSchedules, ParamSchedule, Seeding, WMode,
};

fn value_err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<Method> {
    match name {
        "euler" => Ok(Method::Euler),
        "rk4" => Ok(Method::Rk4),
        _ => Err(PyValueError::new_err(format!("unknown method {name:?}; use 'euler' or 'rk4'"))),
    }
}

fn seeding(initial_fraction: Option<f64>, seed_nodes: Option<Vec<usize>>) -> PyResult<Seeding> {
    match (initial_fraction, seed_nodes) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("give initial_fraction or seed_nodes, not both")),
        (None, Some(nodes)) => Ok(Seeding::Nodes(nodes)),
        (f, None) => Ok(Seeding::Fraction(f.unwrap_or(0.2))),
    }
}

/// Graph with CSR in-neighbor lists. An edge `(u, v)` lets `u` infect `v`.
#[pyclass(frozen, name = "Graph")]
struct PyGraph(sis_core::Graph);

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, directed = false))]
    fn new(n: usize, edges: Vec<(usize, usize)>, directed: bool) -> PyResult<Self> {
        sis_core::Graph::from_edges(n, &edges, directed).map(PyGraph).map_err(value_err)
    }

    /// Parses edge-list text (optional `n=<count>` header, `#` comments).
    #[staticmethod]
    #[pyo3(signature = (text, directed = false))]
    fn from_edge_list(text: &str, directed: bool) -> PyResult<Self> {
        sis_core::load_edge_list(text, directed).map(PyGraph).map_err(value_err)
    }

    #[staticmethod]
    fn complete(n: usize) -> Self {
        PyGraph(generators::complete(n))
    }

    #[staticmethod]
    fn star(leaves: usize) -> Self {
        PyGraph(generators::star(leaves))
    }

    #[staticmethod]
    fn cycle(n: usize) -> Self {
        PyGraph(generators::cycle(n))
    }

    #[staticmethod]
    fn path(n: usize) -> Self {
        PyGraph(generators::path(n))
    }

    #[staticmethod]
    #[pyo3(signature = (n, p, seed = 0))]
    fn gnp(n: usize, p: f64, seed: u64) -> Self {
        PyGraph(generators::gnp(n, p, seed))
    }

    #[staticmethod]
    #[pyo3(signature = (n, p, seed = 0))]
    fn ring_gnp(n: usize, p: f64, seed: u64) -> Self {
        PyGraph(generators::ring_gnp(n, p, seed))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn directed(&self) -> bool {
        self.0.is_directed()
    }

    #[getter]
    fn arc_count(&self) -> usize {
        self.0.arc_count()
    }

    #[getter]
    fn labels(&self) -> Vec<u64> {
        self.0.labels().to_vec()
    }

    fn in_neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        if v >= self.0.n() {
            return Err(PyValueError::new_err(format!("node {v} out of range")));
        }
        Ok(self.0.in_neighbors(v).to_vec())
    }

    /// Spectral radius of the adjacency matrix.
    #[pyo3(signature = (tol = 1e-10, max_iter = 100_000))]
    fn largest_eigenvalue(&self, tol: f64, max_iter: usize) -> PyResult<f64> {
        self.0.largest_eigenvalue(tol, max_iter).map(|r| r.lambda1).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, arcs={}, directed={})", self.0.n(), self.0.arc_count(), self.0.is_directed())
    }
}

/// A rate in [0, 1] as a function of time.
#[pyclass(frozen, skip_from_py_object, name = "Schedule")]
#[derive(Clone)]
struct PySchedule(ParamSchedule);

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn constant(value: f64) -> PyResult<Self> {
        ParamSchedule::constant(value).map(PySchedule).map_err(value_err)
    }

    /// `low` on the first half of each period (after `phase`), `high` on the second.
    #[staticmethod]
    #[pyo3(signature = (low, high, period = 8.0, phase = 0.0))]
    fn square_wave(low: f64, high: f64, period: f64, phase: f64) -> PyResult<Self> {
        ParamSchedule::square_wave(low, high, period, phase).map(PySchedule).map_err(value_err)
    }

    /// Piecewise constant, redrawn uniformly from `[lo, hi]` every `dwell`.
    #[staticmethod]
    #[pyo3(signature = (lo, hi, dwell = 8.0, seed = 0))]
    fn uniform_random(lo: f64, hi: f64, dwell: f64, seed: u64) -> PyResult<Self> {
        ParamSchedule::uniform_random(lo, hi, dwell, seed).map(PySchedule).map_err(value_err)
    }

    fn __call__(&self, t: f64) -> PyResult<f64> {
        self.0.eval(t).map_err(value_err)
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn sup(&self) -> f64 {
        self.0.sup()
    }

    /// Same schedule shifted later by `offset`.
    fn delayed(&self, offset: f64) -> Self {
        PySchedule(self.0.delayed(offset))
    }

    fn __repr__(&self) -> String {
        format!("Schedule({:?})", self.0)
    }
}

fn schedules(beta: &PySchedule, gamma: &PySchedule) -> NodeSchedules {
    NodeSchedules::homogeneous(beta.0.clone(), gamma.0.clone())
}

/// Returns `(verdict, ratio, margin)` comparing `lambda1` with `mean(beta)/mean(gamma)`.
#[pyfunction]
#[pyo3(signature = (lambda1, beta, gamma, tie_tol = dynamics::DEFAULT_TIE_TOL))]
fn threshold_check(lambda1: f64, beta: &PySchedule, gamma: &PySchedule, tie_tol: f64) -> PyResult<(String, f64, f64)> {
    let r = dynamics::threshold_check(lambda1, &BetaSchedule::Shared(beta.0.clone()), &gamma.0, tie_tol).map_err(value_err)?;
    Ok((r.verdict.to_string(), r.ratio, r.margin))
}

/// Integrates the master equation from `i0`; returns `(t, sum_i, final_i)`.
#[pyfunction]
#[pyo3(signature = (graph, i0, beta, gamma, dt = 1.0, steps = 100, method = "euler"))]
fn integrate(
    graph: &PyGraph,
    i0: Vec<f64>,
    beta: &PySchedule,
    gamma: &PySchedule,
    dt: f64,
    steps: usize,
    method: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let init = InfectionState::new(i0, 0.0).map_err(value_err)?;
    let opts = IntegrateOptions { dt, steps, method: self::method(method)?, node_stride: None };
    let ts = dynamics::integrate(&graph.0, &init, &schedules(beta, gamma), &opts).map_err(value_err)?;
    Ok((ts.t, ts.sum_i, ts.final_state.i))
}

/// Top Lyapunov exponent of the linear comparison system.
#[pyfunction]
#[pyo3(signature = (graph, beta, gamma, horizon = 10_000.0, dt = 0.01, renorm_interval = 1.0, method = "rk4"))]
fn estimate_mle(
    graph: &PyGraph,
    beta: &PySchedule,
    gamma: &PySchedule,
    horizon: f64,
    dt: f64,
    renorm_interval: f64,
    method: &str,
) -> PyResult<f64> {
    let opts = MleOptions { horizon, dt, renorm_interval, method: self::method(method)? };
    dynamics::estimate_mle(&graph.0, &schedules(beta, gamma), &opts).map(|e| e.mu).map_err(value_err)
}

/// Stochastic replicates; returns `(t, mean_infected, std_infected)`.
#[pyfunction]
#[pyo3(signature = (graph, beta, gamma, steps, replicates = 50, seed = 0, initial_fraction = None, seed_nodes = None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    graph: &PyGraph,
    beta: &PySchedule,
    gamma: &PySchedule,
    steps: usize,
    replicates: usize,
    seed: u64,
    initial_fraction: Option<f64>,
    seed_nodes: Option<Vec<usize>>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let sched = schedules(beta, gamma);
    let cfg = SimConfig {
        graph: &graph.0,
        schedules: &sched,
        seeding: seeding(initial_fraction, seed_nodes)?,
        replicates,
        steps,
        rng_seed: seed,
        node_stride: None,
    };
    let r = py.detach(|| sim::run(&cfg)).map_err(value_err)?;
    Ok((r.t, r.mean_infected, r.std_infected))
}

/// Equilibrium cure rates that hold `i_star` fixed under constant `gamma`.
#[pyfunction]
fn beta_star(graph: &PyGraph, gamma: f64, i_star: Vec<f64>) -> PyResult<Vec<f64>> {
    control::beta_star(&graph.0, gamma, &i_star).map_err(value_err)
}

/// `(t, sum_i, infected_integral, extinction_time)`.
type DieOutRun = (Vec<f64>, Vec<f64>, f64, Option<f64>);

/// `(t, sum_i, final_i, final_beta)`.
type ContainRun = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Closed-loop run under the die-out controller from zero cure rates.
/// Returns `(t, sum_i, infected_integral, extinction_time)`.
#[pyfunction]
#[pyo3(signature = (graph, i0, gamma, rho, dt = 1.0, steps = 1000))]
fn run_dieout(graph: &PyGraph, i0: Vec<f64>, gamma: &PySchedule, rho: f64, dt: f64, steps: usize) -> PyResult<DieOutRun> {
    let init = InfectionState::new(i0, 0.0).map_err(value_err)?;
    let mut ctl = DieOutController::new(graph.0.n(), rho).map_err(value_err)?;
    let opts = ControlOptions { dt, steps, method: Method::Euler };
    let s = control::run_controlled(&graph.0, &init, &gamma.0, &mut ctl, &opts).map_err(value_err)?;
    Ok((s.t, s.sum_i, s.infected_integral, s.extinction_time))
}

/// Closed-loop run under the containment controller with a uniform target.
/// `w_mode` is "zero" or "proportional". Returns `(t, sum_i, final_i, final_beta)`.
#[pyfunction]
#[pyo3(signature = (graph, i0, gamma, rho, i_star, eta = 0.0, beta0 = 0.0, w_mode = "zero", dt = 1.0, steps = 1000))]
#[allow(clippy::too_many_arguments)]
fn run_contain(
    graph: &PyGraph,
    i0: Vec<f64>,
    gamma: &PySchedule,
    rho: f64,
    i_star: f64,
    eta: f64,
    beta0: f64,
    w_mode: &str,
    dt: f64,
    steps: usize,
) -> PyResult<ContainRun> {
    let n = graph.0.n();
    let w_mode = match w_mode {
        "zero" => WMode::Zero,
        "proportional" => WMode::Proportional,
        other => return Err(PyValueError::new_err(format!("unknown w_mode {other:?}"))),
    };
    let lambda1 = graph.0.largest_eigenvalue(1e-10, 100_000).map_err(value_err)?.lambda1;
    let mut ctl = ContainController::new(
        &graph.0,
        ContainParams { rho, eta, i_star: vec![i_star; n], beta0: vec![beta0; n], w_mode, gamma_ref: gamma.0.mean(), lambda1 },
    )
    .map_err(value_err)?;
    let init = InfectionState::new(i0, 0.0).map_err(value_err)?;
    let opts = ControlOptions { dt, steps, method: Method::Euler };
    let s = control::run_controlled(&graph.0, &init, &gamma.0, &mut ctl, &opts).map_err(value_err)?;
    Ok((s.t, s.sum_i, s.final_state.i, s.final_beta))
}

/// Upper bound on the accumulated infection under the die-out controller.
#[pyfunction]
fn prop1_bound(n: usize, rho: f64, gamma_m: f64, sum_i0: f64) -> PyResult<f64> {
    control::prop1_bound(n, rho, gamma_m, sum_i0).map(|b| b.bound_value).map_err(value_err)
}

/// Upper bound on the accumulated tracking error under proportional containment.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn prop2_bound(
    rho: f64,
    eta: f64,
    gamma: f64,
    lambda1: f64,
    i0: Vec<f64>,
    i_star: Vec<f64>,
    beta0: Vec<f64>,
    beta_star: Vec<f64>,
) -> PyResult<f64> {
    control::prop2_bound(&Prop2Inputs { rho, eta, gamma, lambda1, i0: &i0, i_star: &i_star, beta0: &beta0, beta_star: &beta_star })
        .map(|b| b.bound_value)
        .map_err(value_err)
}

/// Runs an experiment file's text in `mode`; returns the summary line.
/// Relative graph paths resolve against `base_dir`.
#[pyfunction]
#[pyo3(signature = (text, mode, out = None, base_dir = None))]
fn run_config(py: Python<'_>, text: &str, mode: &str, out: Option<PathBuf>, base_dir: Option<PathBuf>) -> PyResult<String> {
    let mode: Mode = mode.parse().map_err(PyValueError::new_err)?;
    let mut cfg = parse_config(text).map_err(value_err)?;
    if let (Some(base), Some(sis_core::config::GraphSource::File { path, .. })) = (base_dir, cfg.graph.as_mut()) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    py.detach(|| sis_core::experiment::run_experiment(&cfg, mode, out.as_deref())).map(|o| o.summary).map_err(value_err)
}

#[pymodule]
fn sisnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(threshold_check, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(beta_star, m)?)?;
    m.add_function(wrap_pyfunction!(run_dieout, m)?)?;
    m.add_function(wrap_pyfunction!(run_contain, m)?)?;
    m.add_function(wrap_pyfunction!(prop1_bound, m)?)?;
    m.add_function(wrap_pyfunction!(prop2_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
