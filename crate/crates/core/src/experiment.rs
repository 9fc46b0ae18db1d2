//! Runs one experiment described by an [`ExperimentConfig`] and writes its
//! artifacts.
//!
//! Artifacts go to the output path when one is given: a CSV for trajectory
//! modes, a key-value report for `threshold`, and for the control modes a CSV
//! plus a `<out>.report` bound block. Every mode returns a one-line summary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, GraphSource, Mode};
use crate::control::{
    self, BoundReport, ContainController, ContainParams, ControlError, ControlOptions, ControlledSeries, DieOutController, Prop2Inputs,
    WMode,
};
use crate::dynamics::{self, extinction_threshold, DynamicsError, IntegrateOptions, MleOptions, Verdict};
use crate::graph::{generators, load_edge_list, Graph, GraphError};
use crate::schedule::{BetaSchedule, NodeSchedules, ParamSchedule};
use crate::simulate::{self, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("loading graph {path}: {source}")]
    GraphFile { path: PathBuf, source: io::Error },
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("{mode}: {source}")]
    Dynamics { mode: Mode, source: DynamicsError },
    #[error("{mode}: {source}")]
    Simulate { mode: Mode, source: SimError },
    #[error("{mode}: {source}")]
    Control { mode: Mode, source: ControlError },
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

/// Builds the configured graph.
pub fn build_graph(src: &GraphSource) -> Result<Graph, ExperimentError> {
    Ok(match *src {
        GraphSource::File { ref path, directed } => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::GraphFile { path: path.clone(), source })?;
            load_edge_list(&text, directed)?
        }
        GraphSource::Complete { n } => generators::complete(n),
        GraphSource::Star { leaves } => generators::star(leaves),
        GraphSource::Cycle { n } => generators::cycle(n),
        GraphSource::Path { n } => generators::path(n),
        GraphSource::Gnp { n, p, seed } => generators::gnp(n, p, seed),
        GraphSource::RingGnp { n, p, seed } => generators::ring_gnp(n, p, seed),
    })
}

/// Compact decimal: at most six fractional digits, trailing zeros dropped.
pub fn short(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn write_artifact(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<PathBuf, ExperimentError> {
    let wrap = |source| ExperimentError::Output { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    f(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)?;
    Ok(path.to_path_buf())
}

fn report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report");
    PathBuf::from(s)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    mode: Mode,
    graph: Graph,
    out: Option<PathBuf>,
}

impl Ctx<'_> {
    fn dyn_err(&self) -> impl Fn(DynamicsError) -> ExperimentError + '_ {
        move |source| ExperimentError::Dynamics { mode: self.mode, source }
    }

    fn sim_err(&self) -> impl Fn(SimError) -> ExperimentError + '_ {
        move |source| ExperimentError::Simulate { mode: self.mode, source }
    }

    fn ctl_err(&self) -> impl Fn(ControlError) -> ExperimentError + '_ {
        move |source| ExperimentError::Control { mode: self.mode, source }
    }

    fn gamma(&self) -> &ParamSchedule {
        self.cfg.gamma.as_ref().expect("checked by require")
    }

    fn schedules(&self) -> NodeSchedules {
        let beta = self.cfg.beta.clone().expect("checked by require");
        NodeSchedules::homogeneous(beta, self.gamma().clone())
    }

    fn lambda1(&self) -> Result<f64, ExperimentError> {
        let sr = self.graph.largest_eigenvalue(self.cfg.spectral_tol, self.cfg.spectral_max_iter)?;
        log::info!("lambda1 = {} after {} iterations (residual {:e})", sr.lambda1, sr.iterations, sr.residual);
        Ok(sr.lambda1)
    }

    fn sim_config<'s>(&'s self, schedules: &'s NodeSchedules) -> SimConfig<'s> {
        SimConfig {
            graph: &self.graph,
            schedules,
            seeding: self.cfg.run.seeding.clone(),
            replicates: self.cfg.run.replicates,
            steps: self.cfg.run.steps,
            rng_seed: self.cfg.run.seed,
            node_stride: self.cfg.run.node_stride,
        }
    }

    fn threshold(&self) -> Result<Outcome, ExperimentError> {
        let lambda1 = self.lambda1()?;
        let beta = BetaSchedule::Shared(self.cfg.beta.clone().expect("checked by require"));
        let report = dynamics::threshold_check(lambda1, &beta, self.gamma(), self.cfg.run.tie_tol).map_err(self.dyn_err())?;
        let mut artifacts = Vec::new();
        if let Some(out) = &self.out {
            artifacts.push(write_artifact(out, |w| report.write_report(w))?);
        }
        Ok(Outcome { summary: format!("{} ratio={} lambda1={}", report.verdict, short(report.ratio), short(lambda1)), artifacts })
    }

    fn integrate(&self) -> Result<Outcome, ExperimentError> {
        let n = self.graph.n();
        let init = self.cfg.run.seeding.expected_state(n).map_err(self.dyn_err())?;
        let opts = IntegrateOptions {
            dt: self.cfg.run.dt,
            steps: self.cfg.run.steps,
            method: self.cfg.run.method,
            node_stride: self.cfg.run.node_stride,
        };
        let ts = dynamics::integrate(&self.graph, &init, &self.schedules(), &opts).map_err(self.dyn_err())?;
        let mut artifacts = Vec::new();
        if let Some(out) = &self.out {
            artifacts.push(write_artifact(out, |w| ts.write_csv(w))?);
        }
        let last = *ts.sum_i.last().expect("nonempty");
        let extinct = match ts.extinction_index() {
            Some(k) => format!("extinct_at={}", short(ts.t[k])),
            None => "extinct_at=none".into(),
        };
        Ok(Outcome { summary: format!("final_sum_i={} {extinct}", short(last)), artifacts })
    }

    fn simulate(&self) -> Result<Outcome, ExperimentError> {
        let schedules = self.schedules();
        let r = simulate::run(&self.sim_config(&schedules)).map_err(self.sim_err())?;
        let mut artifacts = Vec::new();
        if let Some(out) = &self.out {
            artifacts.push(write_artifact(out, |w| r.write_csv(w))?);
        }
        Ok(Outcome {
            summary: format!("final_mean_infected={} replicates={}", short(*r.mean_infected.last().expect("nonempty")), r.replicates),
            artifacts,
        })
    }

    fn compare(&self) -> Result<Outcome, ExperimentError> {
        let schedules = self.schedules();
        let d = simulate::compare_with_model(&self.sim_config(&schedules), self.cfg.run.dt, self.cfg.run.method).map_err(self.sim_err())?;
        let mut artifacts = Vec::new();
        if let Some(out) = &self.out {
            artifacts.push(write_artifact(out, |w| d.write_csv(w))?);
        }
        Ok(Outcome { summary: format!("max_abs_diff={} mean_abs_diff={}", short(d.max_abs), short(d.mean_abs)), artifacts })
    }

    fn mle(&self) -> Result<Outcome, ExperimentError> {
        let m = &self.cfg.mle;
        let opts = MleOptions { horizon: m.horizon, dt: m.dt, renorm_interval: m.renorm_interval, method: m.method };
        let est = dynamics::estimate_mle(&self.graph, &self.schedules(), &opts).map_err(self.dyn_err())?;
        let mut artifacts = Vec::new();
        if let Some(out) = &self.out {
            artifacts.push(write_artifact(out, |w| {
                writeln!(w, "t,log_norm_sum")?;
                for (t, acc) in &est.log_norm_trace {
                    writeln!(w, "{t},{acc}")?;
                }
                Ok(())
            })?);
        }
        let verdict = if est.mu < 0.0 { Verdict::DiesOut } else { Verdict::Persists };
        Ok(Outcome { summary: format!("mu={} {verdict} horizon={}", short(est.mu), short(est.horizon)), artifacts })
    }

    fn control_options(&self) -> ControlOptions {
        ControlOptions { dt: self.cfg.run.dt, steps: self.cfg.run.steps, method: self.cfg.run.method }
    }

    fn emit_control(
        &self,
        series: &ControlledSeries,
        report: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<Vec<PathBuf>, ExperimentError> {
        let mut artifacts = Vec::new();
        if let Some(out) = &self.out {
            artifacts.push(write_artifact(out, |w| series.write_csv(w))?);
            artifacts.push(write_artifact(&report_path(out), report)?);
        }
        Ok(artifacts)
    }

    fn control_dieout(&self) -> Result<Outcome, ExperimentError> {
        let n = self.graph.n();
        let c = self.cfg.control.as_ref().expect("checked by require");
        let init = self.cfg.run.seeding.expected_state(n).map_err(self.dyn_err())?;
        let mut ctl = DieOutController::new(n, c.rho).map_err(self.ctl_err())?;
        ctl.beta.fill(c.beta0);
        let series =
            control::run_controlled(&self.graph, &init, self.gamma(), &mut ctl, &self.control_options()).map_err(self.ctl_err())?;
        let mut bound = (c.rho > 0.0)
            .then(|| control::prop1_bound(n, c.rho, self.gamma().sup(), init.expected_infected()))
            .transpose()
            .map_err(self.ctl_err())?;
        if let Some(b) = bound.take() {
            let mut b = b.with_observation(series.infected_integral, series.infected_integral_until);
            if c.beta0 != 0.0 {
                b.notes.push("bound assumes every cure rate starts at 0");
            }
            if series.extinction_time.is_none() {
                b.notes.push("run ended before extinction; the observed integral is truncated");
            }
            bound = Some(b);
        }
        let artifacts = self.emit_control(&series, |w| {
            writeln!(w, "extinction_time = {}", fmt_opt(series.extinction_time))?;
            writeln!(w, "final_sum_i = {}", series.sum_i.last().expect("nonempty"))?;
            writeln!(w, "final_max_beta = {}", series.max_beta.last().expect("nonempty"))?;
            match &bound {
                Some(b) => b.write_report(w),
                None => writeln!(w, "bound_holds = n/a\nnote = rho = 0 leaves the bound undefined"),
            }
        })?;
        Ok(Outcome {
            summary: format!(
                "final_sum_i={} extinct_at={} bound_holds={}",
                short(*series.sum_i.last().expect("nonempty")),
                series.extinction_time.map_or("none".into(), short),
                holds_str(bound.as_ref())
            ),
            artifacts,
        })
    }

    fn control_contain(&self) -> Result<Outcome, ExperimentError> {
        let n = self.graph.n();
        let c = self.cfg.control.as_ref().expect("checked by require");
        let target = c.i_star.expect("checked by require");
        let init = self.cfg.run.seeding.expected_state(n).map_err(self.dyn_err())?;
        let lambda1 = self.lambda1()?;
        let gamma_ref = self.gamma().mean();
        let i_star = vec![target; n];
        let beta0 = vec![c.beta0; n];
        let mut ctl = ContainController::new(
            &self.graph,
            ContainParams { rho: c.rho, eta: c.eta, i_star: i_star.clone(), beta0: beta0.clone(), w_mode: c.w_mode, gamma_ref, lambda1 },
        )
        .map_err(self.ctl_err())?;
        let beta_star = ctl.beta_star.clone();
        let series =
            control::run_controlled(&self.graph, &init, self.gamma(), &mut ctl, &self.control_options()).map_err(self.ctl_err())?;

        let bound = match c.w_mode {
            WMode::Proportional => control::prop2_bound(&Prop2Inputs {
                rho: c.rho,
                eta: c.eta,
                gamma: gamma_ref,
                lambda1,
                i0: &init.i,
                i_star: &i_star,
                beta0: &beta0,
                beta_star: &beta_star,
            })
            .ok()
            .map(|b| b.with_observation(series.tracking_sq_integral, series.tracking_integral_until)),
            WMode::Zero => None,
        };
        let fin = &series.final_state.i;
        let mean_i = fin.iter().sum::<f64>() / n as f64;
        let max_dev = fin.iter().map(|x| (x - target).abs()).fold(0.0, f64::max);
        let artifacts = self.emit_control(&series, |w| {
            writeln!(w, "i_star = {target}")?;
            writeln!(w, "final_mean_i = {mean_i}")?;
            writeln!(w, "final_max_deviation = {max_dev}")?;
            writeln!(w, "tracking_integral = {}", series.tracking_integral)?;
            writeln!(w, "tracking_sq_integral = {}", series.tracking_sq_integral)?;
            match &bound {
                Some(b) => b.write_report(w),
                None => writeln!(w, "bound_holds = n/a\nnote = the tracking bound needs proportional input with eta > 1 + gamma*lambda1"),
            }
        })?;
        Ok(Outcome {
            summary: format!("final_mean_i={} max_dev={} bound_holds={}", short(mean_i), short(max_dev), holds_str(bound.as_ref())),
            artifacts,
        })
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| v.to_string())
}

fn holds_str(b: Option<&BoundReport>) -> &'static str {
    match b.and_then(BoundReport::holds) {
        Some(true) => "true",
        Some(false) => "false",
        None => "n/a",
    }
}

/// Runs `mode` against `cfg`. `out` overrides the config's output path; with
/// neither, nothing is written and only the summary is returned.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode, out: Option<&Path>) -> Result<Outcome, ExperimentError> {
    cfg.require(mode)?;
    let graph = build_graph(cfg.graph.as_ref().expect("checked by require"))?;
    if graph.n() == 0 {
        return Err(GraphError::NoNodes.into());
    }
    log::info!("{mode}: graph with {} nodes, {} arcs; extinction below {}", graph.n(), graph.arc_count(), extinction_threshold(graph.n()));
    let ctx = Ctx { cfg, mode, graph, out: out.map(Path::to_path_buf).or_else(|| cfg.output.clone()) };
    match mode {
        Mode::Threshold => ctx.threshold(),
        Mode::Integrate => ctx.integrate(),
        Mode::Simulate => ctx.simulate(),
        Mode::Mle => ctx.mle(),
        Mode::ControlDieout => ctx.control_dieout(),
        Mode::ControlContain => ctx.control_contain(),
        Mode::Compare => ctx.compare(),
    }
}
