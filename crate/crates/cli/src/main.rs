use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use sis_core::config::{load_config, Mode};
use sis_core::experiment::run_experiment;

/// Time-varying SIS epidemics on graphs.
///
/// Set RUST_LOG (e.g. `RUST_LOG=info`) for progress messages on stderr.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// threshold, integrate, simulate, mle, control-dieout, control-contain or compare
    mode: Mode,
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the CSV or report; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed; overrides `run.seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.config).with_context(|| format!("config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(m) = cfg.mode {
        if m != args.mode {
            log::warn!("config says mode = {m}; running {} as requested", args.mode);
        }
    }
    let outcome = run_experiment(&cfg, args.mode, args.out.as_deref())?;
    for path in &outcome.artifacts {
        log::info!("wrote {}", path.display());
    }
    println!("{}", outcome.summary);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
