//! Time-varying model inputs: per-node cure rates `β_v(t)` and the edge
//! infection rate `γ(t)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("schedule evaluated at negative time {0}")]
    NegativeTime(f64),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("per-node beta list has {got} entries, graph has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

/// A bounded, deterministic function of time with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSchedule {
    Constant {
        value: f64,
    },
    /// `low` on the first half of each period, `high` on the second, shifted
    /// right by `phase`.
    SquareWave {
        low: f64,
        high: f64,
        period: f64,
        phase: f64,
    },
    /// Piecewise constant over windows of length `dwell`; each window's value
    /// is uniform on `[lo, hi]`, keyed on `(seed, window index)`.
    UniformRandom {
        lo: f64,
        hi: f64,
        dwell: f64,
        seed: u64,
    },
}

/// Long-run mean of a schedule: the exact average over a finite horizon and
/// the analytic limit (the stationary expectation for random schedules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAverage {
    pub over_horizon: f64,
    pub limit: f64,
}

fn unit(name: &str, x: f64) -> Result<(), ScheduleError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(ScheduleError::Invalid(format!("{name} = {x} is outside [0, 1]")))
    }
}

impl ParamSchedule {
    pub fn constant(value: f64) -> Result<Self, ScheduleError> {
        let s = ParamSchedule::Constant { value };
        s.validate()?;
        Ok(s)
    }

    pub fn square_wave(low: f64, high: f64, period: f64, phase: f64) -> Result<Self, ScheduleError> {
        let s = ParamSchedule::SquareWave { low, high, period, phase };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform_random(lo: f64, hi: f64, dwell: f64, seed: u64) -> Result<Self, ScheduleError> {
        let s = ParamSchedule::UniformRandom { lo, hi, dwell, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        match *self {
            ParamSchedule::Constant { value } => unit("value", value),
            ParamSchedule::SquareWave { low, high, period, phase } => {
                unit("low", low)?;
                unit("high", high)?;
                if low > high {
                    return Err(ScheduleError::Invalid(format!("low {low} exceeds high {high}")));
                }
                if !(period > 0.0 && period.is_finite()) {
                    return Err(ScheduleError::Invalid(format!("period must be positive, got {period}")));
                }
                if !(0.0..period).contains(&phase) {
                    return Err(ScheduleError::Invalid(format!("phase {phase} not in [0, {period})")));
                }
                Ok(())
            }
            ParamSchedule::UniformRandom { lo, hi, dwell, .. } => {
                unit("lo", lo)?;
                unit("hi", hi)?;
                if lo > hi {
                    return Err(ScheduleError::Invalid(format!("lo {lo} exceeds hi {hi}")));
                }
                if !(dwell > 0.0 && dwell.is_finite()) {
                    return Err(ScheduleError::Invalid(format!("dwell must be positive, got {dwell}")));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, ScheduleError> {
        if !(t >= 0.0) {
            return Err(ScheduleError::NegativeTime(t));
        }
        Ok(self.value_at(t))
    }

    /// Unchecked evaluation for `t >= 0`.
    pub(crate) fn value_at(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            ParamSchedule::Constant { value } => value,
            ParamSchedule::SquareWave { low, high, period, phase } => {
                if (t - phase).rem_euclid(period) < period / 2.0 {
                    low
                } else {
                    high
                }
            }
            ParamSchedule::UniformRandom { lo, hi, dwell, seed } => {
                let window = (t / dwell).floor() as u64;
                window_value(lo, hi, seed, window)
            }
        }
    }

    /// Supremum over all `t >= 0`.
    pub fn sup(&self) -> f64 {
        match *self {
            ParamSchedule::Constant { value } => value,
            ParamSchedule::SquareWave { high, .. } => high,
            ParamSchedule::UniformRandom { hi, .. } => hi,
        }
    }

    /// Analytic long-run mean.
    pub fn mean(&self) -> f64 {
        match *self {
            ParamSchedule::Constant { value } => value,
            ParamSchedule::SquareWave { low, high, .. } => 0.5 * (low + high),
            ParamSchedule::UniformRandom { lo, hi, .. } => 0.5 * (lo + hi),
        }
    }

    /// Exact mean of the schedule over `[0, horizon]`, alongside its limit.
    pub fn time_average(&self, horizon: f64) -> Result<TimeAverage, ScheduleError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ScheduleError::BadHorizon(horizon));
        }
        let over_horizon = match *self {
            ParamSchedule::Constant { value } => value,
            ParamSchedule::SquareWave { low, high, period, phase } => {
                // Antiderivative of the unshifted wave, valid for any real x.
                let cumulative = |x: f64| {
                    let cycles = (x / period).floor();
                    let r = x - cycles * period;
                    let half = period / 2.0;
                    cycles * half * (low + high) + low * r.min(half) + high * (r - half).max(0.0)
                };
                (cumulative(horizon - phase) - cumulative(-phase)) / horizon
            }
            ParamSchedule::UniformRandom { lo, hi, dwell, seed } => {
                let windows = (horizon / dwell).ceil() as u64;
                let mut acc = 0.0;
                for w in 0..windows {
                    let start = w as f64 * dwell;
                    let len = (start + dwell).min(horizon) - start;
                    acc += len * window_value(lo, hi, seed, w);
                }
                acc / horizon
            }
        };
        Ok(TimeAverage { over_horizon, limit: self.mean() })
    }

    /// The same schedule delayed by `offset` time units (square waves only;
    /// other kinds are returned unchanged).
    pub fn delayed(&self, offset: f64) -> Self {
        match *self {
            ParamSchedule::SquareWave { low, high, period, phase } => {
                ParamSchedule::SquareWave { low, high, period, phase: (phase + offset).rem_euclid(period) }
            }
            ref other => other.clone(),
        }
    }
}

fn window_value(lo: f64, hi: f64, seed: u64, window: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(window);
    lo + (hi - lo) * rng.random::<f64>()
}

/// Relative timing of the cure schedule against the infection schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMode {
    #[default]
    Sync,
    /// β lags γ by a quarter period.
    Async,
    /// β lags γ by half a period.
    AntiSync,
}

impl PhaseMode {
    pub fn lag(self, period: f64) -> f64 {
        match self {
            PhaseMode::Sync => 0.0,
            PhaseMode::Async => period / 4.0,
            PhaseMode::AntiSync => period / 2.0,
        }
    }
}

impl FromStr for PhaseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sync" => Ok(PhaseMode::Sync),
            "async" => Ok(PhaseMode::Async),
            "antisync" | "anti-sync" => Ok(PhaseMode::AntiSync),
            other => Err(format!("unknown phase mode `{other}` (expected sync, async or antisync)")),
        }
    }
}

impl fmt::Display for PhaseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseMode::Sync => "sync",
            PhaseMode::Async => "async",
            PhaseMode::AntiSync => "antisync",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BetaSchedule {
    /// Every node shares one cure schedule.
    Shared(ParamSchedule),
    PerNode(Vec<ParamSchedule>),
}

/// Cure schedules for every node plus the shared infection schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSchedules {
    pub beta: BetaSchedule,
    pub gamma: ParamSchedule,
}

impl NodeSchedules {
    pub fn homogeneous(beta: ParamSchedule, gamma: ParamSchedule) -> Self {
        NodeSchedules { beta: BetaSchedule::Shared(beta), gamma }
    }

    pub fn validate(&self, n: usize) -> Result<(), ScheduleError> {
        self.gamma.validate()?;
        match &self.beta {
            BetaSchedule::Shared(s) => s.validate(),
            BetaSchedule::PerNode(list) => {
                if list.len() != n {
                    return Err(ScheduleError::LengthMismatch { expected: n, got: list.len() });
                }
                list.iter().try_for_each(ParamSchedule::validate)
            }
        }
    }

    pub(crate) fn gamma_at(&self, t: f64) -> f64 {
        self.gamma.value_at(t)
    }

    /// Writes `β_v(t)` for every node into `out`.
    pub(crate) fn fill_beta(&self, t: f64, out: &mut [f64]) {
        match &self.beta {
            BetaSchedule::Shared(s) => out.fill(s.value_at(t)),
            BetaSchedule::PerNode(list) => {
                for (b, s) in out.iter_mut().zip(list) {
                    *b = s.value_at(t);
                }
            }
        }
    }
}
