//! Deterministic machinery: the master equation for per-node infection
//! probabilities, its linear comparison system, the top Lyapunov exponent of
//! that system, and the averaged spectral threshold test.

use std::io::{self, Write};

use thiserror::Error;

use crate::graph::Graph;
use crate::schedule::{BetaSchedule, NodeSchedules, ParamSchedule, ScheduleError};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite derivative at node {node} (t = {t})")]
    NonFinite { node: usize, t: f64 },
    #[error("comparison state overflowed at t = {t}; renormalize more often")]
    Overflow { t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("state has {got} entries, graph has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("mean infection rate is zero; the threshold ratio is undefined")]
    ZeroGamma,
    #[error("threshold test requires a cure schedule shared by all nodes; use the Lyapunov exponent estimate for per-node schedules")]
    PerNodeBeta,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Expected infected count below which a trajectory is reported extinct.
pub fn extinction_threshold(n: usize) -> f64 {
    1e-6 * n as f64
}

/// Per-node infection probabilities at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectionState {
    pub i: Vec<f64>,
    pub t: f64,
}

impl InfectionState {
    pub fn new(i: Vec<f64>, t: f64) -> Result<Self, DynamicsError> {
        if let Some((v, p)) = i.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(DynamicsError::InvalidArgument(format!("i[{v}] = {p} is not a probability")));
        }
        if !(t >= 0.0) {
            return Err(DynamicsError::InvalidArgument(format!("start time {t} is negative")));
        }
        Ok(InfectionState { i, t })
    }

    pub fn zeros(n: usize) -> Self {
        InfectionState { i: vec![0.0; n], t: 0.0 }
    }

    /// Every node infected with the same probability.
    pub fn uniform(n: usize, p: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![p; n], 0.0)
    }

    /// Listed nodes certainly infected, all others susceptible.
    pub fn seeded(n: usize, seeds: &[usize]) -> Result<Self, DynamicsError> {
        let mut i = vec![0.0; n];
        for &v in seeds {
            if v >= n {
                return Err(DynamicsError::InvalidArgument(format!("seed node {v} out of range")));
            }
            i[v] = 1.0;
        }
        Ok(InfectionState { i, t: 0.0 })
    }

    /// Expected number of infected nodes.
    pub fn expected_infected(&self) -> f64 {
        self.i.iter().sum()
    }

    pub fn n(&self) -> usize {
        self.i.len()
    }
}

/// A graph, or a sequence of graphs, that supplies the adjacency at time `t`.
pub trait Topology {
    fn n(&self) -> usize;
    fn graph_at(&self, t: f64) -> &Graph;
    /// Representative graph, used for node labels.
    fn first(&self) -> &Graph;
}

impl Topology for Graph {
    fn n(&self) -> usize {
        Graph::n(self)
    }

    fn graph_at(&self, _t: f64) -> &Graph {
        self
    }

    fn first(&self) -> &Graph {
        self
    }
}

/// Piecewise-constant topology: `graphs[k]` is active from `switch_times[k]`
/// until the next switch. Switches take effect at step boundaries.
#[derive(Debug, Clone)]
pub struct TopologySchedule {
    switches: Vec<(f64, Graph)>,
}

impl TopologySchedule {
    pub fn new(switches: Vec<(f64, Graph)>) -> Result<Self, DynamicsError> {
        let Some((t0, g0)) = switches.first() else {
            return Err(DynamicsError::InvalidArgument("topology schedule is empty".into()));
        };
        if *t0 != 0.0 {
            return Err(DynamicsError::InvalidArgument("first switch time must be 0".into()));
        }
        let n = g0.n();
        for pair in switches.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(DynamicsError::InvalidArgument("switch times must increase strictly".into()));
            }
        }
        if let Some((_, g)) = switches.iter().find(|(_, g)| g.n() != n) {
            return Err(DynamicsError::SizeMismatch { expected: n, got: g.n() });
        }
        Ok(TopologySchedule { switches })
    }
}

impl Topology for TopologySchedule {
    fn n(&self) -> usize {
        self.switches[0].1.n()
    }

    fn graph_at(&self, t: f64) -> &Graph {
        // Small slack so a switch at an exact step time is not missed to rounding.
        let k = self.switches.partition_point(|(s, _)| *s <= t + 1e-9);
        &self.switches[k.max(1) - 1].1
    }

    fn first(&self) -> &Graph {
        &self.switches[0].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Forward Euler, first order.
    #[default]
    Euler,
    /// Classical four-stage Runge–Kutta.
    Rk4,
}

/// `δ_v = 1 − ∏_{u ∈ N_in(v)} (1 − γ·i_u)`.
///
/// Accumulated as `d ← d + a(1 − d)`, which avoids the cancellation in
/// `1 − ∏` when the infection is tiny.
pub fn infection_pressure(g: &Graph, i: &[f64], gamma: f64, v: usize) -> f64 {
    g.in_neighbors(v).iter().fold(0.0, |d, &u| {
        let a = gamma * i[u];
        d + a * (1.0 - d)
    })
}

/// Time-dependent inputs to the master equation.
pub(crate) trait Inputs {
    fn gamma(&self, t: f64) -> f64;
    fn beta(&self, t: f64, out: &mut [f64]);
}

impl Inputs for NodeSchedules {
    fn gamma(&self, t: f64) -> f64 {
        self.gamma_at(t)
    }

    fn beta(&self, t: f64, out: &mut [f64]) {
        self.fill_beta(t, out)
    }
}

/// Externally driven cure rates held fixed over a step.
pub(crate) struct HeldBeta<'a> {
    pub gamma: &'a ParamSchedule,
    pub beta: &'a [f64],
}

impl Inputs for HeldBeta<'_> {
    fn gamma(&self, t: f64) -> f64 {
        self.gamma.value_at(t)
    }

    fn beta(&self, _t: f64, out: &mut [f64]) {
        out.copy_from_slice(self.beta)
    }
}

fn master_rhs(g: &Graph, i: &[f64], gamma: f64, beta: &[f64], w: Option<&[f64]>, out: &mut [f64]) {
    for (v, dv) in out.iter_mut().enumerate() {
        let delta = infection_pressure(g, i, gamma, v);
        *dv = delta * (1.0 - i[v]) - beta[v] * i[v];
    }
    if let Some(w) = w {
        for (dv, wv) in out.iter_mut().zip(w) {
            *dv += wv;
        }
    }
}

fn linear_rhs(g: &Graph, x: &[f64], gamma: f64, beta: &[f64], out: &mut [f64]) {
    for (v, dv) in out.iter_mut().enumerate() {
        let ax: f64 = g.in_neighbors(v).iter().map(|&u| x[u]).sum();
        *dv = gamma * ax - beta[v] * x[v];
    }
}

/// Scratch space for one-step methods.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    beta: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace { k: std::array::from_fn(|_| vec![0.0; n]), stage: vec![0.0; n], beta: vec![0.0; n] }
    }
}

/// Advances `y` by one step of `method`; `rhs(gamma, y, beta, out)` receives
/// the rates already evaluated at the stage time.
fn one_step<I: Inputs + ?Sized>(
    method: Method,
    t: f64,
    dt: f64,
    y: &mut [f64],
    inputs: &I,
    ws: &mut Workspace,
    mut rhs: impl FnMut(f64, &[f64], &[f64], &mut [f64]),
) {
    let Workspace { k, stage, beta } = ws;
    match method {
        Method::Euler => {
            inputs.beta(t, beta);
            rhs(inputs.gamma(t), y, beta, &mut k[0]);
            for (yv, kv) in y.iter_mut().zip(&k[0]) {
                *yv += dt * kv;
            }
        }
        Method::Rk4 => {
            let [k1, k2, k3, k4] = k;
            let half = t + 0.5 * dt;
            inputs.beta(t, beta);
            rhs(inputs.gamma(t), y, beta, k1);
            inputs.beta(half, beta);
            let g_half = inputs.gamma(half);
            for ((s, yv), kv) in stage.iter_mut().zip(y.iter()).zip(k1.iter()) {
                *s = yv + 0.5 * dt * kv;
            }
            rhs(g_half, stage, beta, k2);
            for ((s, yv), kv) in stage.iter_mut().zip(y.iter()).zip(k2.iter()) {
                *s = yv + 0.5 * dt * kv;
            }
            rhs(g_half, stage, beta, k3);
            inputs.beta(t + dt, beta);
            for ((s, yv), kv) in stage.iter_mut().zip(y.iter()).zip(k3.iter()) {
                *s = yv + dt * kv;
            }
            rhs(inputs.gamma(t + dt), stage, beta, k4);
            for (v, yv) in y.iter_mut().enumerate() {
                *yv += dt / 6.0 * (k1[v] + 2.0 * k2[v] + 2.0 * k3[v] + k4[v]);
            }
        }
    }
}

fn first_non_finite(y: &[f64]) -> Option<usize> {
    y.iter().position(|v| !v.is_finite())
}

/// Clamps to `[0, 1]`, returning how many entries were moved.
fn clamp_unit(y: &mut [f64]) -> usize {
    let mut events = 0;
    for v in y.iter_mut() {
        if *v < 0.0 || *v > 1.0 {
            *v = v.clamp(0.0, 1.0);
            events += 1;
        }
    }
    events
}

/// One master-equation step in place; returns the number of clamp events.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance_master<I: Inputs + ?Sized>(
    g: &Graph,
    i: &mut [f64],
    t: f64,
    dt: f64,
    method: Method,
    inputs: &I,
    w: Option<&[f64]>,
    ws: &mut Workspace,
) -> Result<usize, DynamicsError> {
    one_step(method, t, dt, i, inputs, ws, |gamma, y, beta, out| master_rhs(g, y, gamma, beta, w, out));
    if let Some(node) = first_non_finite(i) {
        return Err(DynamicsError::NonFinite { node, t });
    }
    Ok(clamp_unit(i))
}

fn check_dt(dt: f64) -> Result<(), DynamicsError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::InvalidArgument(format!("dt must be positive, got {dt}")))
    }
}

/// Result of a single master-equation step.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterStep {
    pub state: InfectionState,
    pub clamp_events: usize,
}

/// One step of `di_v/dt = δ_v(1 − i_v) − β_v(t) i_v`, clamped to `[0, 1]`.
pub fn master_step(g: &Graph, state: &InfectionState, sched: &NodeSchedules, dt: f64, method: Method) -> Result<MasterStep, DynamicsError> {
    check_dt(dt)?;
    if state.n() != g.n() {
        return Err(DynamicsError::SizeMismatch { expected: g.n(), got: state.n() });
    }
    sched.validate(g.n())?;
    let mut i = state.i.clone();
    let mut ws = Workspace::new(g.n());
    let clamp_events = advance_master(g, &mut i, state.t, dt, method, sched, None, &mut ws)?;
    Ok(MasterStep { state: InfectionState { i, t: state.t + dt }, clamp_events })
}

/// One step of the comparison system `dx/dt = (γ(t)A − B(t)) x`. No clamping.
pub fn linear_step(g: &Graph, x: &[f64], sched: &NodeSchedules, t: f64, dt: f64, method: Method) -> Result<Vec<f64>, DynamicsError> {
    check_dt(dt)?;
    if x.len() != g.n() {
        return Err(DynamicsError::SizeMismatch { expected: g.n(), got: x.len() });
    }
    let mut y = x.to_vec();
    let mut ws = Workspace::new(g.n());
    advance_linear(g, &mut y, t, dt, method, sched, &mut ws)?;
    Ok(y)
}

fn advance_linear(
    g: &Graph,
    x: &mut [f64],
    t: f64,
    dt: f64,
    method: Method,
    sched: &NodeSchedules,
    ws: &mut Workspace,
) -> Result<(), DynamicsError> {
    one_step(method, t, dt, x, sched, ws, |gamma, y, beta, out| linear_rhs(g, y, gamma, beta, out));
    if first_non_finite(x).is_some() {
        return Err(DynamicsError::Overflow { t });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
    /// Record every node's probability every `stride` steps.
    pub node_stride: Option<usize>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { dt: 1.0, steps: 100, method: Method::Euler, node_stride: None }
    }
}

/// Sampled trajectory of the expected infected count, optionally with
/// per-node probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub sum_i: Vec<f64>,
    pub node_stride: Option<usize>,
    /// Per-node rows for steps `0, stride, 2·stride, …`.
    pub node_rows: Vec<Vec<f64>>,
    pub labels: Vec<u64>,
    pub clamp_events: usize,
    pub final_state: InfectionState,
}

impl TimeSeries {
    /// First recorded index where the expected infected count falls below
    /// the extinction threshold.
    pub fn extinction_index(&self) -> Option<usize> {
        let thr = extinction_threshold(self.labels.len());
        self.sum_i.iter().position(|&s| s < thr)
    }

    /// Writes `t,sum_i[,i_<label>…]`. With per-node output only the strided
    /// rows are written.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match self.node_stride {
            None => {
                writeln!(out, "t,sum_i")?;
                for (t, s) in self.t.iter().zip(&self.sum_i) {
                    writeln!(out, "{t},{s}")?;
                }
            }
            Some(stride) => {
                write!(out, "t,sum_i")?;
                for l in &self.labels {
                    write!(out, ",i_{l}")?;
                }
                writeln!(out)?;
                for (row, values) in self.node_rows.iter().enumerate() {
                    let k = row * stride;
                    write!(out, "{},{}", self.t[k], self.sum_i[k])?;
                    for v in values {
                        write!(out, ",{v}")?;
                    }
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }
}

/// Integrates the master equation for `opts.steps` steps, honouring
/// topology switches.
pub fn integrate<T: Topology + ?Sized>(
    topo: &T,
    init: &InfectionState,
    sched: &NodeSchedules,
    opts: &IntegrateOptions,
) -> Result<TimeSeries, DynamicsError> {
    check_dt(opts.dt)?;
    if opts.steps == 0 {
        return Err(DynamicsError::InvalidArgument("steps must be at least 1".into()));
    }
    if opts.node_stride == Some(0) {
        return Err(DynamicsError::InvalidArgument("node stride must be at least 1".into()));
    }
    let n = topo.n();
    if init.n() != n {
        return Err(DynamicsError::SizeMismatch { expected: n, got: init.n() });
    }
    sched.validate(n)?;

    let mut i = init.i.clone();
    let mut ws = Workspace::new(n);
    let mut series = TimeSeries {
        t: Vec::with_capacity(opts.steps + 1),
        sum_i: Vec::with_capacity(opts.steps + 1),
        node_stride: opts.node_stride,
        node_rows: Vec::new(),
        labels: topo.first().labels().to_vec(),
        clamp_events: 0,
        final_state: init.clone(),
    };
    let record = |series: &mut TimeSeries, k: usize, t: f64, i: &[f64]| {
        series.t.push(t);
        series.sum_i.push(i.iter().sum());
        if let Some(stride) = opts.node_stride {
            if k.is_multiple_of(stride) {
                series.node_rows.push(i.to_vec());
            }
        }
    };
    record(&mut series, 0, init.t, &i);
    for k in 0..opts.steps {
        let t = init.t + k as f64 * opts.dt;
        let g = topo.graph_at(t);
        series.clamp_events += advance_master(g, &mut i, t, opts.dt, opts.method, sched, None, &mut ws)?;
        record(&mut series, k + 1, init.t + (k + 1) as f64 * opts.dt, &i);
    }
    series.final_state = InfectionState { i, t: init.t + opts.steps as f64 * opts.dt };
    Ok(series)
}

/// Trajectory of the comparison system from `x0`, one row per step
/// (including the initial row).
pub fn integrate_linear<T: Topology + ?Sized>(
    topo: &T,
    x0: &[f64],
    sched: &NodeSchedules,
    dt: f64,
    steps: usize,
    method: Method,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    check_dt(dt)?;
    let n = topo.n();
    if x0.len() != n {
        return Err(DynamicsError::SizeMismatch { expected: n, got: x0.len() });
    }
    sched.validate(n)?;
    let mut ws = Workspace::new(n);
    let mut x = x0.to_vec();
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(x.clone());
    for k in 0..steps {
        let t = k as f64 * dt;
        advance_linear(topo.graph_at(t), &mut x, t, dt, method, sched, &mut ws)?;
        rows.push(x.clone());
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub horizon: f64,
    pub dt: f64,
    pub renorm_interval: f64,
    pub method: Method,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { horizon: 10_000.0, dt: 0.01, renorm_interval: 1.0, method: Method::Rk4 }
    }
}

/// Finite-horizon estimate of the top Lyapunov exponent of the comparison
/// system.
#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub mu: f64,
    pub horizon: f64,
    pub renorm_interval: f64,
    /// `(t, Σ ln‖x‖₁ so far)` at every renormalisation.
    pub log_norm_trace: Vec<(f64, f64)>,
}

/// Grows the normalised all-ones vector under the comparison system,
/// accumulating `ln‖x‖₁` and rescaling every `renorm_interval`.
pub fn estimate_mle<T: Topology + ?Sized>(topo: &T, sched: &NodeSchedules, opts: &MleOptions) -> Result<MleEstimate, DynamicsError> {
    check_dt(opts.dt)?;
    if !(opts.renorm_interval >= opts.dt && opts.horizon >= opts.renorm_interval) {
        return Err(DynamicsError::InvalidArgument(format!(
            "need horizon ({}) >= renorm_interval ({}) >= dt ({})",
            opts.horizon, opts.renorm_interval, opts.dt
        )));
    }
    let n = topo.n();
    if n == 0 {
        return Err(DynamicsError::InvalidArgument("empty graph".into()));
    }
    sched.validate(n)?;

    let steps = (opts.horizon / opts.dt).round() as usize;
    let renorm_every = ((opts.renorm_interval / opts.dt).round() as usize).max(1);
    let mut x = vec![1.0 / n as f64; n];
    let mut ws = Workspace::new(n);
    let mut acc = 0.0;
    let mut trace = Vec::with_capacity(steps / renorm_every + 1);

    for k in 0..steps {
        let t = k as f64 * opts.dt;
        advance_linear(topo.graph_at(t), &mut x, t, opts.dt, opts.method, sched, &mut ws)?;
        if (k + 1) % renorm_every == 0 || k + 1 == steps {
            let norm: f64 = x.iter().map(|v| v.abs()).sum();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(DynamicsError::Overflow { t: t + opts.dt });
            }
            acc += norm.ln();
            x.iter_mut().for_each(|v| *v /= norm);
            trace.push(((k + 1) as f64 * opts.dt, acc));
        }
    }
    let horizon = steps as f64 * opts.dt;
    let mu = acc / horizon;
    if !mu.is_finite() {
        return Err(DynamicsError::Overflow { t: horizon });
    }
    Ok(MleEstimate { mu, horizon, renorm_interval: renorm_every as f64 * opts.dt, log_norm_trace: trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    DiesOut,
    Persists,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::DiesOut => "DiesOut",
            Verdict::Persists => "Persists",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub lambda1: f64,
    pub beta_bar: f64,
    pub gamma_bar: f64,
    pub ratio: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

impl ThresholdReport {
    pub fn write_report<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "verdict = {}", self.verdict)?;
        writeln!(out, "lambda1 = {}", self.lambda1)?;
        writeln!(out, "beta_bar = {}", self.beta_bar)?;
        writeln!(out, "gamma_bar = {}", self.gamma_bar)?;
        writeln!(out, "ratio = {}", self.ratio)?;
        writeln!(out, "margin = {}", self.margin)
    }
}

/// Default tie tolerance, relative to `λ₁`.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Compares `λ₁` with `β̄/γ̄` using the schedules' analytic long-run means
/// (stationary expectations for random schedules). Ties within
/// `tie_tol·λ₁` are inconclusive.
pub fn threshold_check(lambda1: f64, beta: &BetaSchedule, gamma: &ParamSchedule, tie_tol: f64) -> Result<ThresholdReport, DynamicsError> {
    let BetaSchedule::Shared(beta) = beta else {
        return Err(DynamicsError::PerNodeBeta);
    };
    beta.validate()?;
    gamma.validate()?;
    let beta_bar = beta.mean();
    let gamma_bar = gamma.mean();
    if gamma_bar <= 0.0 {
        return Err(DynamicsError::ZeroGamma);
    }
    let ratio = beta_bar / gamma_bar;
    let margin = ratio - lambda1;
    let tol = tie_tol * lambda1.abs();
    let verdict = if margin > tol {
        Verdict::DiesOut
    } else if margin < -tol {
        Verdict::Persists
    } else {
        Verdict::Inconclusive
    };
    Ok(ThresholdReport { lambda1, beta_bar, gamma_bar, ratio, margin, verdict })
}
