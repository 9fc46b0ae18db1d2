//! Discrete-time stochastic SIS process, used to validate the master
//! equation against the process it approximates.
//!
//! Each unit step evaluates `γ(t)` and `β_v(t)` at the integer time `t` and
//! computes every node's transition from the time-`t` state: a susceptible
//! node with `k` infected in-neighbours becomes infected with probability
//! `1 − (1 − γ)^k`, an infected node is cured with probability `β_v`. All
//! transitions are then applied together.
//!
//! Replicate `r` draws from the ChaCha stream `r` of the configured seed, and
//! replicates are reduced with integer counters, so results are bit-identical
//! regardless of how rayon schedules the work.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, InfectionState, IntegrateOptions, Method, TimeSeries};
use crate::graph::Graph;
use crate::schedule::{NodeSchedules, ScheduleError};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// How the initially infected nodes are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Seeding {
    /// `round(fraction·n)` nodes drawn uniformly without replacement, per replicate.
    Fraction(f64),
    /// A fixed set of nodes, identical in every replicate.
    Nodes(Vec<usize>),
}

impl Seeding {
    fn count(&self, n: usize) -> usize {
        match self {
            Seeding::Fraction(f) => ((f * n as f64).round() as usize).clamp(1, n),
            Seeding::Nodes(nodes) => nodes.len(),
        }
    }

    /// The model's initial state: each node's probability of being seeded.
    pub fn expected_state(&self, n: usize) -> Result<InfectionState, DynamicsError> {
        match self {
            Seeding::Fraction(_) => InfectionState::uniform(n, self.count(n) as f64 / n as f64),
            Seeding::Nodes(nodes) => InfectionState::seeded(n, nodes),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub graph: &'a Graph,
    pub schedules: &'a NodeSchedules,
    pub seeding: Seeding,
    pub replicates: usize,
    pub steps: usize,
    pub rng_seed: u64,
    /// Record per-node infection frequencies every `stride` steps.
    pub node_stride: Option<usize>,
}

impl SimConfig<'_> {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.graph.n();
        if n == 0 {
            return Err(SimError::Config("graph has no nodes".into()));
        }
        if self.replicates == 0 {
            return Err(SimError::Config("replicates must be at least 1".into()));
        }
        if self.node_stride == Some(0) {
            return Err(SimError::Config("node stride must be at least 1".into()));
        }
        match &self.seeding {
            Seeding::Fraction(f) => {
                if !(*f > 0.0 && *f <= 1.0) {
                    return Err(SimError::Config(format!("initial_fraction {f} not in (0, 1]")));
                }
                if f * (n as f64) < 1.0 {
                    return Err(SimError::Config(format!("initial_fraction {f} seeds fewer than one of {n} nodes")));
                }
            }
            Seeding::Nodes(nodes) => {
                if let Some(&v) = nodes.iter().find(|&&v| v >= n) {
                    return Err(SimError::Config(format!("seed node {v} out of range")));
                }
                let mut sorted = nodes.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != nodes.len() {
                    return Err(SimError::Config("seed nodes repeat".into()));
                }
            }
        }
        self.schedules.validate(n)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub t: Vec<f64>,
    /// Mean number of infected nodes per step, across replicates.
    pub mean_infected: Vec<f64>,
    /// Sample standard deviation of the infected count per step.
    pub std_infected: Vec<f64>,
    pub node_stride: Option<usize>,
    /// Per-node infection frequency for steps `0, stride, …`.
    pub node_freq: Vec<Vec<f64>>,
    pub labels: Vec<u64>,
    pub replicates: usize,
}

impl SimResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match self.node_stride {
            None => {
                writeln!(out, "t,mean_infected")?;
                for (t, m) in self.t.iter().zip(&self.mean_infected) {
                    writeln!(out, "{t},{m}")?;
                }
            }
            Some(stride) => {
                write!(out, "t,mean_infected")?;
                for l in &self.labels {
                    write!(out, ",f_{l}")?;
                }
                writeln!(out)?;
                for (row, freqs) in self.node_freq.iter().enumerate() {
                    let k = row * stride;
                    write!(out, "{},{}", self.t[k], self.mean_infected[k])?;
                    for f in freqs {
                        write!(out, ",{f}")?;
                    }
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }
}

/// Integer tallies summed over replicates.
#[derive(Debug, Clone)]
struct Tally {
    count: Vec<u64>,
    count_sq: Vec<u64>,
    node_hits: Vec<Vec<u32>>,
}

impl Tally {
    fn zero(steps: usize, node_rows: usize, n: usize) -> Self {
        Tally { count: vec![0; steps + 1], count_sq: vec![0; steps + 1], node_hits: vec![vec![0; n]; node_rows] }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        for (a, b) in self.count_sq.iter_mut().zip(&other.count_sq) {
            *a += b;
        }
        for (row, other_row) in self.node_hits.iter_mut().zip(&other.node_hits) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
        self
    }
}

fn node_rows(steps: usize, stride: Option<usize>) -> usize {
    stride.map_or(0, |s| steps / s + 1)
}

fn run_replicate(cfg: &SimConfig<'_>, replicate: usize) -> Tally {
    let g = cfg.graph;
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(replicate as u64);

    let mut infected = vec![false; n];
    match &cfg.seeding {
        Seeding::Fraction(_) => {
            for v in rand::seq::index::sample(&mut rng, n, cfg.seeding.count(n)) {
                infected[v] = true;
            }
        }
        Seeding::Nodes(nodes) => nodes.iter().for_each(|&v| infected[v] = true),
    }

    let mut tally = Tally::zero(cfg.steps, node_rows(cfg.steps, cfg.node_stride), n);
    let mut next = infected.clone();
    let mut beta = vec![0.0; n];
    let record = |tally: &mut Tally, k: usize, state: &[bool]| {
        let c = state.iter().filter(|&&b| b).count() as u64;
        tally.count[k] = c;
        tally.count_sq[k] = c * c;
        if let Some(stride) = cfg.node_stride {
            if k.is_multiple_of(stride) {
                for (hit, &b) in tally.node_hits[k / stride].iter_mut().zip(state) {
                    *hit = b as u32;
                }
            }
        }
    };
    record(&mut tally, 0, &infected);

    for k in 0..cfg.steps {
        let t = k as f64;
        let gamma = cfg.schedules.gamma_at(t);
        cfg.schedules.fill_beta(t, &mut beta);
        let escape = 1.0 - gamma;
        for v in 0..n {
            next[v] = if infected[v] {
                !(beta[v] > 0.0 && rng.random::<f64>() < beta[v])
            } else {
                let k_inf = g.in_neighbors(v).iter().filter(|&&u| infected[u]).count();
                if k_inf > 0 && gamma > 0.0 {
                    let p = 1.0 - escape.powi(k_inf as i32);
                    rng.random::<f64>() < p
                } else {
                    false
                }
            };
        }
        std::mem::swap(&mut infected, &mut next);
        record(&mut tally, k + 1, &infected);
    }
    tally
}

/// Runs all replicates (in parallel) and averages them.
pub fn run(cfg: &SimConfig<'_>) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let n = cfg.graph.n();
    let rows = node_rows(cfg.steps, cfg.node_stride);
    let tally = (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, r)).reduce(|| Tally::zero(cfg.steps, rows, n), Tally::merge);

    let reps = cfg.replicates as f64;
    let mean_infected: Vec<f64> = tally.count.iter().map(|&c| c as f64 / reps).collect();
    let std_infected = tally
        .count
        .iter()
        .zip(&tally.count_sq)
        .map(|(&c, &sq)| {
            if cfg.replicates < 2 {
                return 0.0;
            }
            let mean = c as f64 / reps;
            ((sq as f64 - reps * mean * mean) / (reps - 1.0)).max(0.0).sqrt()
        })
        .collect();
    let node_freq = tally.node_hits.iter().map(|row| row.iter().map(|&h| h as f64 / reps).collect()).collect();
    Ok(SimResult {
        t: (0..=cfg.steps).map(|k| k as f64).collect(),
        mean_infected,
        std_infected,
        node_stride: cfg.node_stride,
        node_freq,
        labels: cfg.graph.labels().to_vec(),
        replicates: cfg.replicates,
    })
}

/// Simulation and model curves side by side.
#[derive(Debug, Clone)]
pub struct Discrepancy {
    /// `max_t |sim(t) − model(t)| / n`.
    pub max_abs: f64,
    /// Mean over steps of `|sim(t) − model(t)| / n`.
    pub mean_abs: f64,
    pub sim: SimResult,
    /// Model expected infected count sampled at the simulation's integer times.
    pub model: Vec<f64>,
    pub model_series: TimeSeries,
}

impl Discrepancy {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,mean_infected,model_sum_i,abs_diff")?;
        for ((t, s), m) in self.sim.t.iter().zip(&self.sim.mean_infected).zip(&self.model) {
            writeln!(out, "{t},{s},{m},{}", (s - m).abs())?;
        }
        Ok(())
    }
}

/// Runs the simulator and the master equation from the matching expected
/// initial state. `dt` must divide one time unit.
pub fn compare_with_model(cfg: &SimConfig<'_>, dt: f64, method: Method) -> Result<Discrepancy, SimError> {
    cfg.validate()?;
    let per_unit = (1.0 / dt).round();
    if !(dt > 0.0 && per_unit >= 1.0 && (per_unit * dt - 1.0).abs() < 1e-9) {
        return Err(SimError::Config(format!("dt = {dt} must be 1/k for an integer k")));
    }
    let per_unit = per_unit as usize;
    let n = cfg.graph.n();
    let sim = run(cfg)?;
    let init = cfg.seeding.expected_state(n)?;
    let opts = IntegrateOptions { dt, steps: cfg.steps.max(1) * per_unit, method, node_stride: None };
    let model_series = dynamics::integrate(cfg.graph, &init, cfg.schedules, &opts)?;
    let model: Vec<f64> = (0..=cfg.steps).map(|k| model_series.sum_i[k * per_unit]).collect();
    let diffs: Vec<f64> = sim.mean_infected.iter().zip(&model).map(|(s, m)| (s - m).abs() / n as f64).collect();
    let max_abs = diffs.iter().copied().fold(0.0, f64::max);
    let mean_abs = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok(Discrepancy { max_abs, mean_abs, sim, model, model_series })
}
