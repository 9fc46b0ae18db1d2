//! Fully adaptive defenses: the defender never sees `γ(t)`, only the
//! infection probabilities `i_v(t)`, and evolves each node's cure rate from
//! them.
//!
//! * [`DieOutController`]: `dβ_v/dt = ρ·i_v` from `β_v(0) = 0`, which drives
//!   the infection extinct.
//! * [`ContainController`]: `dβ_v/dt = ρ(i_v − i*_v)·i_v` with optional
//!   plant input `w_v = η(i*_v − i_v)`, which holds `i_v` at a target level.
//!
//! Cure rates are probabilities, so controller updates are clamped to
//! `[0, 1]` and every clamp is counted.

use std::io::{self, Write};

use thiserror::Error;

use crate::dynamics::{self, extinction_threshold, DynamicsError, HeldBeta, InfectionState, Method, Workspace};
use crate::graph::Graph;
use crate::schedule::ParamSchedule;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("invalid controller argument: {0}")]
    InvalidArgument(String),
    #[error("target infection level i*[{node}] = {value} must lie in (0, 1]")]
    BadTarget { node: usize, value: f64 },
    #[error("gain condition violated: need {lhs_name} = {lhs} > 1 + γλ₁ = {rhs}")]
    GainCondition { lhs_name: &'static str, lhs: f64, rhs: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// A feedback law that sets per-node cure rates from observed infection.
pub trait Controller {
    fn cure_rates(&self) -> &[f64];
    /// Additive plant input `w_v` for the observed state, if any.
    fn plant_input(&self, i: &[f64]) -> Option<Vec<f64>>;
    /// Advances the cure rates by `dt` given the observed state.
    fn update(&mut self, i: &[f64], dt: f64);
    fn clamp_events(&self) -> usize;
    /// Target levels, for controllers that track one.
    fn targets(&self) -> Option<&[f64]> {
        None
    }
}

fn check_dt(dt: f64) -> Result<(), ControlError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(ControlError::InvalidArgument(format!("dt must be positive, got {dt}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DieOutController {
    pub rho: f64,
    pub beta: Vec<f64>,
    pub clamp_events: usize,
}

impl DieOutController {
    /// Starts every cure rate at zero.
    pub fn new(n: usize, rho: f64) -> Result<Self, ControlError> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(ControlError::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
        }
        Ok(DieOutController { rho, beta: vec![0.0; n], clamp_events: 0 })
    }

    /// `β_v ← min(1, β_v + dt·ρ·i_v)`.
    pub fn step(&mut self, i: &[f64], dt: f64) -> &[f64] {
        for (b, &iv) in self.beta.iter_mut().zip(i) {
            *b += dt * self.rho * iv;
            if *b > 1.0 {
                *b = 1.0;
                self.clamp_events += 1;
            }
        }
        &self.beta
    }
}

impl Controller for DieOutController {
    fn cure_rates(&self) -> &[f64] {
        &self.beta
    }

    fn plant_input(&self, _i: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn update(&mut self, i: &[f64], dt: f64) {
        self.step(i, dt);
    }

    fn clamp_events(&self) -> usize {
        self.clamp_events
    }
}

/// Equilibrium cure rates that make `i*` a fixed point of the master
/// equation under a constant `γ`:
/// `β*_v = (1 − ∏_{u ∈ N_in(v)} (1 − γ·i*_u))(1 − i*_v) / i*_v`.
pub fn beta_star(g: &Graph, gamma: f64, i_star: &[f64]) -> Result<Vec<f64>, ControlError> {
    if i_star.len() != g.n() {
        return Err(DynamicsError::SizeMismatch { expected: g.n(), got: i_star.len() }.into());
    }
    if let Some((node, &value)) = i_star.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x <= 1.0)) {
        return Err(ControlError::BadTarget { node, value });
    }
    Ok((0..g.n()).map(|v| dynamics::infection_pressure(g, i_star, gamma, v) * (1.0 - i_star[v]) / i_star[v]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WMode {
    /// No plant input.
    #[default]
    Zero,
    /// `w_v = η(i*_v − i_v)`.
    Proportional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainController {
    pub rho: f64,
    pub eta: f64,
    pub i_star: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub w_mode: WMode,
    pub clamp_events: usize,
}

/// Construction inputs for [`ContainController`].
#[derive(Debug, Clone)]
pub struct ContainParams {
    pub rho: f64,
    pub eta: f64,
    pub i_star: Vec<f64>,
    /// Initial cure rates.
    pub beta0: Vec<f64>,
    pub w_mode: WMode,
    /// The single `γ` used for `β*`; pass the time average when the plant's
    /// `γ(t)` varies.
    pub gamma_ref: f64,
    pub lambda1: f64,
}

impl ContainController {
    /// Computes `β*` and, for proportional input, checks
    /// `η + min_v β*_v > 1 + γλ₁`.
    pub fn new(g: &Graph, p: ContainParams) -> Result<Self, ControlError> {
        let n = g.n();
        if !(p.rho > 0.0 && p.rho.is_finite()) {
            return Err(ControlError::InvalidArgument(format!("rho must be positive, got {}", p.rho)));
        }
        if !(p.eta >= 0.0 && p.eta.is_finite()) {
            return Err(ControlError::InvalidArgument(format!("eta must be nonnegative, got {}", p.eta)));
        }
        if !(0.0..=1.0).contains(&p.gamma_ref) {
            return Err(ControlError::InvalidArgument(format!("gamma {} not in [0, 1]", p.gamma_ref)));
        }
        if p.beta0.len() != n {
            return Err(DynamicsError::SizeMismatch { expected: n, got: p.beta0.len() }.into());
        }
        if p.beta0.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(ControlError::InvalidArgument("initial cure rates must lie in [0, 1]".into()));
        }
        let beta_star = beta_star(g, p.gamma_ref, &p.i_star)?;
        if p.w_mode == WMode::Proportional {
            let min_star = beta_star.iter().copied().fold(f64::INFINITY, f64::min);
            let lhs = p.eta + min_star;
            let rhs = 1.0 + p.gamma_ref * p.lambda1;
            if !(lhs > rhs) {
                return Err(ControlError::GainCondition { lhs_name: "η + min β*", lhs, rhs });
            }
        }
        Ok(ContainController { rho: p.rho, eta: p.eta, i_star: p.i_star, beta: p.beta0, beta_star, w_mode: p.w_mode, clamp_events: 0 })
    }

    fn w(&self, i: &[f64]) -> Vec<f64> {
        match self.w_mode {
            WMode::Zero => vec![0.0; i.len()],
            WMode::Proportional => self.i_star.iter().zip(i).map(|(s, x)| self.eta * (s - x)).collect(),
        }
    }

    /// Returns the plant input for the observed state, then advances
    /// `β_v ← clamp(β_v + dt·ρ(i_v − i*_v)i_v, 0, 1)`.
    pub fn step(&mut self, i: &[f64], dt: f64) -> Vec<f64> {
        let w = self.w(i);
        for ((b, &iv), &target) in self.beta.iter_mut().zip(i).zip(&self.i_star) {
            *b += dt * self.rho * (iv - target) * iv;
            if !(0.0..=1.0).contains(b) {
                *b = b.clamp(0.0, 1.0);
                self.clamp_events += 1;
            }
        }
        w
    }
}

impl Controller for ContainController {
    fn cure_rates(&self) -> &[f64] {
        &self.beta
    }

    fn plant_input(&self, i: &[f64]) -> Option<Vec<f64>> {
        match self.w_mode {
            WMode::Zero => None,
            WMode::Proportional => Some(self.w(i)),
        }
    }

    fn update(&mut self, i: &[f64], dt: f64) {
        self.step(i, dt);
    }

    fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    fn targets(&self) -> Option<&[f64]> {
        Some(&self.i_star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions { dt: 1.0, steps: 1000, method: Method::Euler }
    }
}

/// Closed-loop trajectory and the integrals the convergence bounds speak to.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledSeries {
    pub t: Vec<f64>,
    pub sum_i: Vec<f64>,
    pub mean_beta: Vec<f64>,
    pub max_beta: Vec<f64>,
    /// Cumulative clamp events (plant plus controller) after each step.
    pub clamp_events: Vec<usize>,
    /// Trapezoidal `∫ Σ_v i_v dt`, accumulated until extinction.
    pub infected_integral: f64,
    /// Trapezoidal `∫ Σ_v |i_v − i*_v| dt` (tracking controllers only),
    /// accumulated until convergence.
    pub tracking_integral: f64,
    /// Same, with squared deviations.
    pub tracking_sq_integral: f64,
    /// Time at which each integral stopped accumulating.
    pub infected_integral_until: f64,
    pub tracking_integral_until: f64,
    pub extinction_time: Option<f64>,
    pub final_state: InfectionState,
    pub final_beta: Vec<f64>,
}

impl ControlledSeries {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,sum_i,mean_beta,max_beta,clamp_events")?;
        for k in 0..self.t.len() {
            writeln!(out, "{},{},{},{},{}", self.t[k], self.sum_i[k], self.mean_beta[k], self.max_beta[k], self.clamp_events[k])?;
        }
        Ok(())
    }

    /// First time the expected infected count reaches `level` or below.
    pub fn time_to(&self, level: f64) -> Option<f64> {
        self.sum_i.iter().position(|&s| s <= level).map(|k| self.t[k])
    }
}

/// Runs plant and controller in lockstep. Each step the plant advances under
/// the current cure rates (plus `w`), while the controller advances from the
/// same pre-step observation. `γ(t)` reaches only the plant.
pub fn run_controlled<C: Controller + ?Sized>(
    g: &Graph,
    init: &InfectionState,
    gamma: &ParamSchedule,
    controller: &mut C,
    opts: &ControlOptions,
) -> Result<ControlledSeries, ControlError> {
    check_dt(opts.dt)?;
    let n = g.n();
    if init.n() != n {
        return Err(DynamicsError::SizeMismatch { expected: n, got: init.n() }.into());
    }
    if controller.cure_rates().len() != n {
        return Err(DynamicsError::SizeMismatch { expected: n, got: controller.cure_rates().len() }.into());
    }
    gamma.validate().map_err(DynamicsError::from)?;

    let extinct_at = extinction_threshold(n);
    let targets: Option<Vec<f64>> = controller.targets().map(<[f64]>::to_vec);
    let deviation = |i: &[f64]| -> (f64, f64) {
        match &targets {
            Some(ts) => i.iter().zip(ts).fold((0.0, 0.0), |(l1, sq), (x, s)| {
                let d = (x - s).abs();
                (l1 + d, sq + d * d)
            }),
            None => (0.0, 0.0),
        }
    };
    let beta_stats = |b: &[f64]| {
        let mean = if n == 0 { 0.0 } else { b.iter().sum::<f64>() / n as f64 };
        (mean, b.iter().copied().fold(0.0, f64::max))
    };

    let mut i = init.i.clone();
    let mut ws = Workspace::new(n);
    let mut plant_clamps = 0;
    let (mb, xb) = beta_stats(controller.cure_rates());
    let mut series = ControlledSeries {
        t: vec![init.t],
        sum_i: vec![i.iter().sum()],
        mean_beta: vec![mb],
        max_beta: vec![xb],
        clamp_events: vec![controller.clamp_events()],
        infected_integral: 0.0,
        tracking_integral: 0.0,
        tracking_sq_integral: 0.0,
        infected_integral_until: init.t,
        tracking_integral_until: init.t,
        extinction_time: None,
        final_state: init.clone(),
        final_beta: Vec::new(),
    };
    let mut infected_done = series.sum_i[0] < extinct_at;
    let (mut prev_l1, mut prev_sq) = deviation(&i);
    let mut tracking_done = targets.is_none() || prev_l1 < extinct_at;
    if infected_done {
        series.extinction_time = Some(init.t);
    }

    for k in 0..opts.steps {
        let t = init.t + k as f64 * opts.dt;
        let observed = i.clone();
        let beta = controller.cure_rates().to_vec();
        let w = controller.plant_input(&observed);
        let inputs = HeldBeta { gamma, beta: &beta };
        plant_clamps += dynamics::advance_master(g, &mut i, t, opts.dt, opts.method, &inputs, w.as_deref(), &mut ws)?;
        controller.update(&observed, opts.dt);

        let t_next = init.t + (k + 1) as f64 * opts.dt;
        let prev_sum = *series.sum_i.last().expect("nonempty");
        let sum: f64 = i.iter().sum();
        if !infected_done {
            series.infected_integral += 0.5 * opts.dt * (prev_sum + sum);
            series.infected_integral_until = t_next;
            if sum < extinct_at {
                infected_done = true;
                series.extinction_time = Some(t_next);
            }
        }
        let (l1, sq) = deviation(&i);
        if !tracking_done {
            series.tracking_integral += 0.5 * opts.dt * (prev_l1 + l1);
            series.tracking_sq_integral += 0.5 * opts.dt * (prev_sq + sq);
            series.tracking_integral_until = t_next;
            tracking_done = l1 < extinct_at;
        }
        prev_l1 = l1;
        prev_sq = sq;

        let (mb, xb) = beta_stats(controller.cure_rates());
        series.t.push(t_next);
        series.sum_i.push(sum);
        series.mean_beta.push(mb);
        series.max_beta.push(xb);
        series.clamp_events.push(plant_clamps + controller.clamp_events());
    }
    series.final_state = InfectionState { i, t: init.t + opts.steps as f64 * opts.dt };
    series.final_beta = controller.cure_rates().to_vec();
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Accumulated infection under the die-out controller.
    DieOut,
    /// Accumulated tracking error under the containment controller.
    Contain,
}

/// A convergence bound, its inputs, and optionally what a run observed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub bound_value: f64,
    pub inputs: Vec<(&'static str, f64)>,
    pub observed_integral: Option<f64>,
    /// Time the observed integral was truncated at.
    pub observed_until: Option<f64>,
    /// Whether comparing an observation against the bound is meaningful.
    pub conformance_applicable: bool,
    pub notes: Vec<&'static str>,
}

impl BoundReport {
    pub fn with_observation(mut self, integral: f64, until: f64) -> Self {
        self.observed_integral = Some(integral);
        self.observed_until = Some(until);
        self
    }

    /// `None` when nothing was observed or the comparison does not apply.
    pub fn holds(&self) -> Option<bool> {
        match self.observed_integral {
            Some(obs) if self.conformance_applicable => Some(obs <= self.bound_value),
            _ => None,
        }
    }

    /// Key-value text block.
    pub fn write_report<W: Write>(&self, mut out: W) -> io::Result<()> {
        let kind = match self.kind {
            BoundKind::DieOut => "dieout",
            BoundKind::Contain => "contain",
        };
        writeln!(out, "bound_kind = {kind}")?;
        writeln!(out, "bound_value = {}", self.bound_value)?;
        for (k, v) in &self.inputs {
            writeln!(out, "{k} = {v}")?;
        }
        if let Some(obs) = self.observed_integral {
            writeln!(out, "observed_integral = {obs}")?;
        }
        if let Some(until) = self.observed_until {
            writeln!(out, "observed_until = {until}")?;
        }
        let holds = match self.holds() {
            Some(true) => "true",
            Some(false) => "false",
            None => "n/a",
        };
        writeln!(out, "bound_holds = {holds}")?;
        for note in &self.notes {
            writeln!(out, "note = {note}")?;
        }
        Ok(())
    }
}

/// Upper bound on `∫₀^∞ Σ_v i_v dt` under the die-out controller:
/// `(n−1)²γ_m/ρ + (n−1)/ρ · √(Σ_v i_v(0) + (n−1)³γ_m²/(2ρ))`,
/// with `γ_m = sup_t γ(t)`.
///
/// The Lyapunov argument behind it puts `n·β₀²/(2ρ)` in the initial energy,
/// where this formula carries `n−1`, so on very small graphs the observed
/// integral can exceed it. On graphs of a few dozen nodes or more it is loose.
pub fn prop1_bound(n: usize, rho: f64, gamma_m: f64, sum_i0: f64) -> Result<BoundReport, ControlError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(ControlError::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if !(0.0..=1.0).contains(&gamma_m) {
        return Err(ControlError::InvalidArgument(format!("gamma_m {gamma_m} not in [0, 1]")));
    }
    if !(sum_i0 >= 0.0) {
        return Err(ControlError::InvalidArgument(format!("sum_i0 {sum_i0} is negative")));
    }
    let m = n.saturating_sub(1) as f64;
    let bound_value = m * m * gamma_m / rho + m / rho * (sum_i0 + m.powi(3) * gamma_m * gamma_m / (2.0 * rho)).sqrt();
    let mut notes = Vec::new();
    if n <= 1 {
        notes.push("single-node graph: the bound reduces to 0 and is not compared against runs");
    } else if n < 10 {
        notes.push("small graph: the formula undercounts the gain term and can be exceeded");
    }
    Ok(BoundReport {
        kind: BoundKind::DieOut,
        bound_value,
        inputs: vec![("n", n as f64), ("rho", rho), ("gamma_m", gamma_m), ("sum_i0", sum_i0)],
        observed_integral: None,
        observed_until: None,
        conformance_applicable: n > 1,
        notes,
    })
}

/// Inputs to [`prop2_bound`].
#[derive(Debug, Clone)]
pub struct Prop2Inputs<'a> {
    pub rho: f64,
    pub eta: f64,
    pub gamma: f64,
    pub lambda1: f64,
    pub i0: &'a [f64],
    pub i_star: &'a [f64],
    pub beta0: &'a [f64],
    pub beta_star: &'a [f64],
}

/// Tracking-error bound for the containment controller with proportional
/// input, using unit node weights:
/// `[½Σ(i_v(0) − i*_v)² + (1/2ρ)Σ(β_v(0) − β*_v)²] / (η − 1 − γλ₁)`.
///
/// The Lyapunov argument behind it bounds `∫₀^∞ Σ_v (i_v − i*_v)² dt`, so
/// that is the quantity to compare against. The absolute-deviation integral
/// scales linearly with the initial error while the bound scales
/// quadratically, and small perturbations exceed it.
pub fn prop2_bound(p: &Prop2Inputs<'_>) -> Result<BoundReport, ControlError> {
    if !(p.rho > 0.0 && p.rho.is_finite()) {
        return Err(ControlError::InvalidArgument(format!("rho must be positive, got {}", p.rho)));
    }
    let n = p.i0.len();
    for len in [p.i_star.len(), p.beta0.len(), p.beta_star.len()] {
        if len != n {
            return Err(DynamicsError::SizeMismatch { expected: n, got: len }.into());
        }
    }
    let denom = p.eta - 1.0 - p.gamma * p.lambda1;
    if !(denom > 0.0) {
        return Err(ControlError::GainCondition { lhs_name: "η", lhs: p.eta, rhs: 1.0 + p.gamma * p.lambda1 });
    }
    let state_term: f64 = p.i0.iter().zip(p.i_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 2.0;
    let gain_term: f64 = p.beta0.iter().zip(p.beta_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * p.rho);
    Ok(BoundReport {
        kind: BoundKind::Contain,
        bound_value: (state_term + gain_term) / denom,
        inputs: vec![
            ("n", n as f64),
            ("rho", p.rho),
            ("eta", p.eta),
            ("gamma", p.gamma),
            ("lambda1", p.lambda1),
            ("state_term", state_term),
            ("gain_term", gain_term),
        ],
        observed_integral: None,
        observed_until: None,
        conformance_applicable: true,
        notes: vec!["node weights P_v = 1", "observed_integral is the squared tracking error, the quantity the Lyapunov argument bounds"],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators::{complete, path};
    use approx::assert_abs_diff_eq;

    #[test]
    fn dieout_step_cases() {
        let mut c = DieOutController::new(3, 0.01).unwrap();
        c.step(&[0.0; 3], 1.0);
        assert_eq!(c.beta, vec![0.0; 3]);
        c.step(&[0.5; 3], 1.0);
        for b in &c.beta {
            assert_abs_diff_eq!(*b, 0.005, epsilon = 1e-15);
        }
    }

    #[test]
    fn dieout_clamps_at_one() {
        let mut c = DieOutController::new(1, 10.0).unwrap();
        c.step(&[0.5], 1.0);
        assert_eq!(c.beta, vec![1.0]);
        assert_eq!(c.clamp_events, 1);
    }

    #[test]
    fn beta_star_cases() {
        let k = complete(4);
        assert_eq!(beta_star(&k, 0.3, &[1.0; 4]).unwrap(), vec![0.0; 4]);
        let iso = Graph::from_edges(1, &[], false).unwrap();
        assert_eq!(beta_star(&iso, 0.3, &[0.5]).unwrap(), vec![0.0]);
        let one = Graph::from_edges(2, &[(0, 1)], true).unwrap();
        let b = beta_star(&one, 0.5, &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(b[1], 0.25, epsilon = 1e-15);
        assert!(matches!(beta_star(&one, 0.5, &[0.0, 0.5]), Err(ControlError::BadTarget { node: 0, .. })));
    }

    #[test]
    fn beta_star_is_a_fixed_point() {
        let g = path(5);
        let i_star = [0.1, 0.2, 0.15, 0.3, 0.05];
        let bs = beta_star(&g, 0.2, &i_star).unwrap();
        for v in 0..5 {
            let d = dynamics::infection_pressure(&g, &i_star, 0.2, v) * (1.0 - i_star[v]) - bs[v] * i_star[v];
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
        }
    }

    fn contain(g: &Graph, rho: f64, eta: f64, mode: WMode, gamma: f64, lambda1: f64) -> Result<ContainController, ControlError> {
        ContainController::new(
            g,
            ContainParams { rho, eta, i_star: vec![0.1; g.n()], beta0: vec![0.0; g.n()], w_mode: mode, gamma_ref: gamma, lambda1 },
        )
    }

    #[test]
    fn contain_fixed_point_and_hand_update() {
        let g = path(3);
        let mut c = contain(&g, 0.001, 0.5, WMode::Zero, 0.01, 2f64.sqrt()).unwrap();
        let w = c.step(&[0.1; 3], 1.0);
        assert_eq!(w, vec![0.0; 3]);
        assert_eq!(c.beta, vec![0.0; 3]);
        let mut c = contain(&g, 0.001, 0.5, WMode::Zero, 0.01, 2f64.sqrt()).unwrap();
        c.step(&[0.2; 3], 1.0);
        assert_abs_diff_eq!(c.beta[0], 2e-5, epsilon = 1e-18);
    }

    #[test]
    fn contain_proportional_input_and_gain_check() {
        let g = path(3);
        let lambda1 = 2f64.sqrt();
        assert!(matches!(contain(&g, 0.1, 0.5, WMode::Proportional, 0.1, lambda1), Err(ControlError::GainCondition { .. })));
        let mut c = contain(&g, 0.1, 2.5, WMode::Proportional, 0.1, lambda1).unwrap();
        let w = c.step(&[0.3, 0.1, 0.0], 1.0);
        assert_abs_diff_eq!(w[0], -0.5, epsilon = 1e-15);
        assert_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[2], 0.25, epsilon = 1e-15);
        // i = 0 < i* pushes β down; it is clamped at 0.
        assert_eq!(c.beta[2], 0.0);
    }

    #[test]
    fn zero_gain_never_cures() {
        let g = complete(5);
        let mut c = DieOutController::new(5, 0.0).unwrap();
        let init = InfectionState::uniform(5, 0.2).unwrap();
        let gamma = ParamSchedule::constant(0.3).unwrap();
        let s = run_controlled(&g, &init, &gamma, &mut c, &ControlOptions { steps: 500, ..Default::default() }).unwrap();
        assert!(s.extinction_time.is_none());
        assert!(*s.sum_i.last().unwrap() > 4.0);
    }

    #[test]
    fn prop1_reductions() {
        let r = prop1_bound(10, 0.5, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(r.bound_value, 9.0 / 0.5 * 2.0, epsilon = 1e-12);
        let r = prop1_bound(1, 0.5, 0.3, 1.0).unwrap();
        assert_eq!(r.bound_value, 0.0);
        assert!(!r.conformance_applicable);
        assert_eq!(r.clone().with_observation(3.0, 1.0).holds(), None);
        assert!(prop1_bound(10, 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn prop1_hand_value() {
        // (99²·0.007)/0.01 + 99/0.01·√(20 + 99³·0.007²/0.02)
        let expected = 6860.7 + 9900.0 * (20.0 + 970_299.0 * 0.000049 / 0.02f64).sqrt();
        let r = prop1_bound(100, 0.01, 0.007, 20.0).unwrap();
        assert_abs_diff_eq!(r.bound_value, expected, epsilon = 1e-6);
    }

    fn prop2(rho: f64, i0: &[f64], beta0: &[f64]) -> Result<BoundReport, ControlError> {
        prop2_bound(&Prop2Inputs { rho, eta: 3.0, gamma: 0.1, lambda1: 2.0, i0, i_star: &[0.1, 0.1], beta0, beta_star: &[0.2, 0.3] })
    }

    #[test]
    fn prop2_vanishes_at_equilibrium() {
        let r = prop2(0.5, &[0.1, 0.1], &[0.2, 0.3]).unwrap();
        assert_eq!(r.bound_value, 0.0);
    }

    #[test]
    fn prop2_decreases_with_rho() {
        let a = prop2(0.5, &[0.3, 0.1], &[0.0, 0.0]).unwrap().bound_value;
        let b = prop2(1.0, &[0.3, 0.1], &[0.0, 0.0]).unwrap().bound_value;
        assert!(b < a);
        // η − 1 − γλ₁ = 1.8: (0.02 + 0.13/2ρ)/1.8 at ρ = 1.
        assert_abs_diff_eq!(b, (0.5 * 0.04 + 0.13 / 2.0) / 1.8, epsilon = 1e-12);
    }

    #[test]
    fn prop2_rejects_weak_gain() {
        let err = prop2_bound(&Prop2Inputs {
            rho: 1.0,
            eta: 1.1,
            gamma: 0.1,
            lambda1: 2.0,
            i0: &[0.1],
            i_star: &[0.1],
            beta0: &[0.0],
            beta_star: &[0.0],
        })
        .unwrap_err();
        assert!(matches!(err, ControlError::GainCondition { .. }));
    }

    #[test]
    fn report_block_lists_keys() {
        let r = prop1_bound(5, 0.1, 0.2, 1.0).unwrap().with_observation(1.0, 12.0);
        let mut buf = Vec::new();
        r.write_report(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("bound_kind = dieout"));
        assert!(text.contains("observed_until = 12"));
        assert!(text.contains("bound_holds = true"));
    }
}
