mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, Task};
use error::CliError;
use output::Sink;

/// Guided intermediate resampling filter experiments.
#[derive(Parser)]
#[command(name = "girf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate latent paths and observations.
    Simulate(Common),
    /// Estimate the log likelihood with one engine.
    Filter(Common),
    /// Run several engines on the same data.
    Compare(Common),
    /// Maximize the likelihood by iterated guided filtering.
    Igirf(Common),
    /// Evaluate a profile likelihood over a parameter grid.
    Profile(Common),
    /// Monte Carlo adjusted profile confidence interval.
    Mcap(Common),
    /// Run the task named in the configuration file.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configured one, then `girf-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for particle-level parallelism.
    #[arg(long, env = "GIRF_THREADS")]
    threads: Option<usize>,
}

fn execute(task: Option<Task>, common: &Common) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let task = match task.or(config.task) {
        Some(t) => t,
        None => {
            return Err(CliError::Config(
                "`run` needs a `task` field in the configuration".into(),
            ))
        }
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("girf-out"));
    let sink = Sink::create(&dir)?;
    sink.json(
        "provenance.json",
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "task": task.as_str(),
            "seed": config.seed,
            "threads": rayon::current_num_threads(),
            "config_path": common.config,
            "config": config,
        }),
    )?;
    run::dispatch(task, &config, &sink)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (task, common) = match &cli.command {
        Command::Simulate(c) => (Some(Task::Simulate), c),
        Command::Filter(c) => (Some(Task::Filter), c),
        Command::Compare(c) => (Some(Task::Compare), c),
        Command::Igirf(c) => (Some(Task::Igirf), c),
        Command::Profile(c) => (Some(Task::Profile), c),
        Command::Mcap(c) => (Some(Task::Mcap), c),
        Command::Run(c) => (None, c),
    };
    match execute(task, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("girf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
