//! Experiment files.
//!
//! An experiment is a TOML document of flat sections. Every key is optional
//! unless the chosen mode needs it; unknown keys are rejected.
//!
//! ```toml
//! mode = "threshold"        # threshold | integrate | simulate | mle |
//!                           # control-dieout | control-contain | compare
//! output = "out.csv"
//!
//! [graph]                   # either a file ...
//! path = "oregon.txt"       # relative to the config file
//! directed = false
//! # ... or a generator: complete | star | cycle | path | gnp | ring_gnp
//! # generator = "ring_gnp"
//! # n = 500
//! # p = 0.02
//! # seed = 1
//!
//! [beta]                    # kind = constant | square | uniform
//! kind = "square"
//! low = 0.3
//! high = 0.5
//! period = 8                # default 8
//! phase = 0                 # default 0
//!
//! [gamma]
//! kind = "uniform"
//! lo = 0.0015
//! hi = 0.0035
//! dwell = 8                 # default: period
//! seed = 3
//!
//! [run]
//! dt = 1.0                  # default 1
//! steps = 200
//! method = "euler"          # euler | rk4
//! initial_fraction = 0.2    # default 0.2; or seed_nodes = [0, 5]
//! seed = 1                  # simulation RNG seed
//! node_stride = 10          # per-node CSV columns every 10 steps
//! phase_mode = "async"      # sync | async | antisync: beta lags gamma by 0, T/4, T/2
//! tie_tol = 1e-9
//!
//! [simulate]
//! replicates = 50           # default 50
//!
//! [mle]
//! horizon = 10000
//! dt = 0.01
//! renorm_interval = 1.0
//! method = "rk4"
//!
//! [control]
//! rho = 0.02
//! eta = 0.0
//! i_star = 0.1
//! w_mode = "zero"           # zero | proportional
//! beta0 = 0.0
//!
//! [spectral]
//! tol = 1e-10
//! max_iter = 100000
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::control::WMode;
use crate::dynamics::{Method, DEFAULT_TIE_TOL};
use crate::schedule::{ParamSchedule, PhaseMode};
use crate::simulate::Seeding;

pub const DEFAULT_PERIOD: f64 = 8.0;
pub const DEFAULT_DT: f64 = 1.0;
pub const DEFAULT_REPLICATES: usize = 50;
pub const DEFAULT_INITIAL_FRACTION: f64 = 0.2;
pub const DEFAULT_STEPS: usize = 200;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`{key}` = {value} is out of range: {expected}")]
    Range { key: &'static str, value: String, expected: &'static str },
    #[error("`{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Threshold,
    Integrate,
    Simulate,
    Mle,
    ControlDieout,
    ControlContain,
    Compare,
}

impl Mode {
    pub const ALL: [Mode; 7] =
        [Mode::Threshold, Mode::Integrate, Mode::Simulate, Mode::Mle, Mode::ControlDieout, Mode::ControlContain, Mode::Compare];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Threshold => "threshold",
            Mode::Integrate => "integrate",
            Mode::Simulate => "simulate",
            Mode::Mle => "mle",
            Mode::ControlDieout => "control-dieout",
            Mode::ControlContain => "control-contain",
            Mode::Compare => "compare",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

// Raw document, mirrored one-to-one from the TOML.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    output: Option<PathBuf>,
    graph: Option<RawGraph>,
    beta: Option<RawSchedule>,
    gamma: Option<RawSchedule>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    simulate: RawSimulate,
    #[serde(default)]
    mle: RawMle,
    control: Option<RawControl>,
    #[serde(default)]
    spectral: RawSpectral,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    path: Option<PathBuf>,
    directed: Option<bool>,
    generator: Option<String>,
    n: Option<usize>,
    p: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    kind: Option<String>,
    value: Option<f64>,
    low: Option<f64>,
    high: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    period: Option<f64>,
    phase: Option<f64>,
    dwell: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    dt: Option<f64>,
    steps: Option<usize>,
    method: Option<String>,
    initial_fraction: Option<f64>,
    seed_nodes: Option<Vec<usize>>,
    seed: Option<u64>,
    node_stride: Option<usize>,
    phase_mode: Option<String>,
    tie_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    replicates: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMle {
    horizon: Option<f64>,
    dt: Option<f64>,
    renorm_interval: Option<f64>,
    method: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    rho: Option<f64>,
    eta: Option<f64>,
    i_star: Option<f64>,
    w_mode: Option<String>,
    beta0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectral {
    tol: Option<f64>,
    max_iter: Option<usize>,
}

// Validated configuration.

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File { path: PathBuf, directed: bool },
    Complete { n: usize },
    Star { leaves: usize },
    Cycle { n: usize },
    Path { n: usize },
    Gnp { n: usize, p: f64, seed: u64 },
    RingGnp { n: usize, p: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
    pub seeding: Seeding,
    pub seed: u64,
    pub node_stride: Option<usize>,
    pub phase_mode: PhaseMode,
    pub tie_tol: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleParams {
    pub horizon: f64,
    pub dt: f64,
    pub renorm_interval: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    pub rho: f64,
    pub eta: f64,
    pub i_star: Option<f64>,
    pub w_mode: WMode,
    pub beta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub output: Option<PathBuf>,
    pub graph: Option<GraphSource>,
    /// Cure schedule with the phase-mode lag already applied.
    pub beta: Option<ParamSchedule>,
    pub gamma: Option<ParamSchedule>,
    pub run: RunParams,
    pub mle: MleParams,
    pub control: Option<ControlParams>,
    pub spectral_tol: f64,
    pub spectral_max_iter: usize,
}

fn range_err(key: &'static str, value: impl fmt::Display, expected: &'static str) -> ConfigError {
    ConfigError::Range { key, value: value.to_string(), expected }
}

fn unit(key: &'static str, x: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(range_err(key, x, "[0, 1]"))
    }
}

fn positive(key: &'static str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(range_err(key, x, "> 0"))
    }
}

fn method(key: &'static str, s: Option<&str>, default: Method) -> Result<Method, ConfigError> {
    match s {
        None => Ok(default),
        Some("euler") => Ok(Method::Euler),
        Some("rk4") => Ok(Method::Rk4),
        Some(other) => Err(ConfigError::Invalid { key, msg: format!("unknown method `{other}` (expected euler or rk4)") }),
    }
}

struct ScheduleKeys {
    kind: &'static str,
    value: &'static str,
    low: &'static str,
    high: &'static str,
    lo: &'static str,
    hi: &'static str,
    period: &'static str,
    phase: &'static str,
    dwell: &'static str,
}

const BETA_KEYS: ScheduleKeys = ScheduleKeys {
    kind: "beta.kind",
    value: "beta.value",
    low: "beta.low",
    high: "beta.high",
    lo: "beta.lo",
    hi: "beta.hi",
    period: "beta.period",
    phase: "beta.phase",
    dwell: "beta.dwell",
};

const GAMMA_KEYS: ScheduleKeys = ScheduleKeys {
    kind: "gamma.kind",
    value: "gamma.value",
    low: "gamma.low",
    high: "gamma.high",
    lo: "gamma.lo",
    hi: "gamma.hi",
    period: "gamma.period",
    phase: "gamma.phase",
    dwell: "gamma.dwell",
};

fn schedule(raw: &RawSchedule, keys: &ScheduleKeys) -> Result<ParamSchedule, ConfigError> {
    let kind = raw.kind.as_deref().ok_or(ConfigError::Missing(keys.kind))?;
    let need = |v: Option<f64>, key: &'static str| v.ok_or(ConfigError::Missing(key));
    let period = positive(keys.period, raw.period.unwrap_or(DEFAULT_PERIOD))?;
    match kind {
        "constant" => Ok(ParamSchedule::Constant { value: unit(keys.value, need(raw.value, keys.value)?)? }),
        "square" => {
            let low = unit(keys.low, need(raw.low, keys.low)?)?;
            let high = unit(keys.high, need(raw.high, keys.high)?)?;
            if low > high {
                return Err(range_err(keys.low, low, "<= high"));
            }
            let phase = raw.phase.unwrap_or(0.0);
            if !(0.0..period).contains(&phase) {
                return Err(range_err(keys.phase, phase, "[0, period)"));
            }
            Ok(ParamSchedule::SquareWave { low, high, period, phase })
        }
        "uniform" => {
            let lo = unit(keys.lo, need(raw.lo, keys.lo)?)?;
            let hi = unit(keys.hi, need(raw.hi, keys.hi)?)?;
            if lo > hi {
                return Err(range_err(keys.lo, lo, "<= hi"));
            }
            let dwell = positive(keys.dwell, raw.dwell.unwrap_or(period))?;
            Ok(ParamSchedule::UniformRandom { lo, hi, dwell, seed: raw.seed.unwrap_or(0) })
        }
        other => Err(ConfigError::Invalid {
            key: keys.kind,
            msg: format!("unknown schedule kind `{other}` (expected constant, square or uniform)"),
        }),
    }
}

fn graph_source(raw: &RawGraph) -> Result<GraphSource, ConfigError> {
    match (&raw.path, raw.generator.as_deref()) {
        (Some(_), Some(_)) => Err(ConfigError::Invalid { key: "graph.path", msg: "give either a path or a generator, not both".into() }),
        (Some(path), None) => Ok(GraphSource::File { path: path.clone(), directed: raw.directed.unwrap_or(false) }),
        (None, None) => Err(ConfigError::Missing("graph.path")),
        (None, Some(generator)) => {
            let n = raw.n.ok_or(ConfigError::Missing("graph.n"))?;
            if n == 0 {
                return Err(range_err("graph.n", n, ">= 1"));
            }
            let p = || -> Result<f64, ConfigError> { unit("graph.p", raw.p.ok_or(ConfigError::Missing("graph.p"))?) };
            let seed = raw.seed.unwrap_or(0);
            match generator {
                "complete" => Ok(GraphSource::Complete { n }),
                "star" => Ok(GraphSource::Star { leaves: n }),
                "cycle" => Ok(GraphSource::Cycle { n }),
                "path" => Ok(GraphSource::Path { n }),
                "gnp" => Ok(GraphSource::Gnp { n, p: p()?, seed }),
                "ring_gnp" => Ok(GraphSource::RingGnp { n, p: p()?, seed }),
                other => Err(ConfigError::Invalid { key: "graph.generator", msg: format!("unknown generator `{other}`") }),
            }
        }
    }
}

/// Parses and range-checks an experiment document, applying defaults.
/// Mode-specific requirements are checked by [`ExperimentConfig::require`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let mode = raw.mode.as_deref().map(|m| m.parse::<Mode>().map_err(|msg| ConfigError::Invalid { key: "mode", msg })).transpose()?;
    let graph = raw.graph.as_ref().map(graph_source).transpose()?;

    let r = &raw.run;
    let phase_mode = match r.phase_mode.as_deref() {
        None => PhaseMode::Sync,
        Some(s) => s.parse().map_err(|msg| ConfigError::Invalid { key: "run.phase_mode", msg })?,
    };
    let gamma = raw.gamma.as_ref().map(|g| schedule(g, &GAMMA_KEYS)).transpose()?;
    let beta = raw.beta.as_ref().map(|b| schedule(b, &BETA_KEYS)).transpose()?.map(|b| match b {
        ParamSchedule::SquareWave { period, .. } => b.delayed(phase_mode.lag(period)),
        other => other,
    });

    let seeding = match (&r.seed_nodes, r.initial_fraction) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid { key: "run.seed_nodes", msg: "give either seed_nodes or initial_fraction, not both".into() })
        }
        (Some(nodes), None) => Seeding::Nodes(nodes.clone()),
        (None, f) => {
            let f = f.unwrap_or(DEFAULT_INITIAL_FRACTION);
            if !(f > 0.0 && f <= 1.0) {
                return Err(range_err("run.initial_fraction", f, "(0, 1]"));
            }
            Seeding::Fraction(f)
        }
    };
    if r.node_stride == Some(0) {
        return Err(range_err("run.node_stride", 0, ">= 1"));
    }
    let steps = r.steps.unwrap_or(DEFAULT_STEPS);
    if steps == 0 {
        return Err(range_err("run.steps", 0, ">= 1"));
    }
    let replicates = raw.simulate.replicates.unwrap_or(DEFAULT_REPLICATES);
    if replicates == 0 {
        return Err(range_err("simulate.replicates", 0, ">= 1"));
    }
    let tie_tol = r.tie_tol.unwrap_or(DEFAULT_TIE_TOL);
    if !(tie_tol >= 0.0) {
        return Err(range_err("run.tie_tol", tie_tol, ">= 0"));
    }
    let run = RunParams {
        dt: positive("run.dt", r.dt.unwrap_or(DEFAULT_DT))?,
        steps,
        method: method("run.method", r.method.as_deref(), Method::Euler)?,
        seeding,
        seed: r.seed.unwrap_or(0),
        node_stride: r.node_stride,
        phase_mode,
        tie_tol,
        replicates,
    };

    let m = &raw.mle;
    let mle = MleParams {
        horizon: positive("mle.horizon", m.horizon.unwrap_or(10_000.0))?,
        dt: positive("mle.dt", m.dt.unwrap_or(0.01))?,
        renorm_interval: positive("mle.renorm_interval", m.renorm_interval.unwrap_or(1.0))?,
        method: method("mle.method", m.method.as_deref(), Method::Rk4)?,
    };
    if mle.renorm_interval < mle.dt || mle.horizon < mle.renorm_interval {
        return Err(ConfigError::Invalid { key: "mle.renorm_interval", msg: "need horizon >= renorm_interval >= dt".into() });
    }

    let control = raw
        .control
        .as_ref()
        .map(|c| -> Result<ControlParams, ConfigError> {
            let rho = c.rho.ok_or(ConfigError::Missing("control.rho"))?;
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(range_err("control.rho", rho, ">= 0"));
            }
            let eta = c.eta.unwrap_or(0.0);
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(range_err("control.eta", eta, ">= 0"));
            }
            let i_star =
                c.i_star.map(|x| if x > 0.0 && x <= 1.0 { Ok(x) } else { Err(range_err("control.i_star", x, "(0, 1]")) }).transpose()?;
            let w_mode = match c.w_mode.as_deref() {
                None | Some("zero") => WMode::Zero,
                Some("proportional") => WMode::Proportional,
                Some(other) => {
                    return Err(ConfigError::Invalid {
                        key: "control.w_mode",
                        msg: format!("unknown w_mode `{other}` (expected zero or proportional)"),
                    })
                }
            };
            Ok(ControlParams { rho, eta, i_star, w_mode, beta0: unit("control.beta0", c.beta0.unwrap_or(0.0))? })
        })
        .transpose()?;

    let spectral_tol = positive("spectral.tol", raw.spectral.tol.unwrap_or(1e-10))?;
    let spectral_max_iter = raw.spectral.max_iter.unwrap_or(100_000);

    Ok(ExperimentConfig { mode, output: raw.output, graph, beta, gamma, run, mle, control, spectral_tol, spectral_max_iter })
}

/// Reads a config file; a relative graph path is resolved against the
/// file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(GraphSource::File { path: p, .. }) = &mut cfg.graph {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(out) = &mut cfg.output {
        if out.is_relative() {
            *out = base.join(&*out);
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Checks that every key `mode` depends on is present.
    pub fn require(&self, mode: Mode) -> Result<(), ConfigError> {
        if self.graph.is_none() {
            return Err(ConfigError::Missing("graph.path"));
        }
        if self.gamma.is_none() {
            return Err(ConfigError::Missing("gamma.kind"));
        }
        match mode {
            Mode::Threshold | Mode::Integrate | Mode::Simulate | Mode::Mle | Mode::Compare => {
                if self.beta.is_none() {
                    return Err(ConfigError::Missing("beta.kind"));
                }
            }
            Mode::ControlDieout => {
                self.control.as_ref().ok_or(ConfigError::Missing("control.rho"))?;
            }
            Mode::ControlContain => {
                let c = self.control.as_ref().ok_or(ConfigError::Missing("control.rho"))?;
                if c.i_star.is_none() {
                    return Err(ConfigError::Missing("control.i_star"));
                }
                if !(c.rho > 0.0) {
                    return Err(range_err("control.rho", c.rho, "> 0"));
                }
            }
        }
        Ok(())
    }
}
