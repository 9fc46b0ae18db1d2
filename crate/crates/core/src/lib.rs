//! Non-homogeneous, time-varying SIS epidemics on graphs.
//!
//! * [`graph`]: edge-list loading and the adjacency spectral radius.
//! * [`schedule`]: time-varying cure and infection rates.
//! * [`dynamics`]: master equation, comparison system, Lyapunov exponent and
//!   the averaged threshold test.
//! * [`simulate`]: stochastic replicates of the underlying process.
//! * [`control`]: adaptive die-out and containment defenses with their bounds.
//! * [`config`] and [`experiment`]: experiment files and orchestration.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod dynamics;
pub mod experiment;
pub mod graph;
pub mod schedule;
pub mod simulate;

pub use control::{BoundReport, ContainController, ContainParams, Controller, DieOutController, WMode};
pub use dynamics::{InfectionState, Method, MleEstimate, ThresholdReport, TimeSeries, Topology, TopologySchedule, Verdict};
pub use graph::{load_edge_list, Graph, SpectralResult};
pub use schedule::{BetaSchedule, NodeSchedules, ParamSchedule, PhaseMode};
pub use simulate::{Seeding, SimConfig, SimResult};
