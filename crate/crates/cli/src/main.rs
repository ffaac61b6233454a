//! Command-line front end: single closed-loop episodes and Monte Carlo
//! comparisons, both written as CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ensemble_control::harness::{
    accumulated_error, compare_controllers, load_config, load_preset, run_episode,
    write_summary_csv, write_trace_csv, ControllerKind, RunConfig, Window, PRESET_NAMES,
};
use ensemble_control::plant::TrajectoryKind;

#[derive(Debug, Parser)]
#[command(
    name = "ensemble-sim",
    version,
    about = "Adaptive ensemble control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop episode and write its per-step trace.
    Simulate(SimulateArgs),
    /// Run paired Monte Carlo episodes for several controllers and write a summary.
    Montecarlo(MonteCarloArgs),
}

/// Where the run configuration comes from, plus per-invocation overrides.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (base, noise1, noise2, noise3, noise4).
    #[arg(long, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    /// Reference shape: square, triangle or sine.
    #[arg(long, value_name = "KIND")]
    trajectory: Option<TrajectoryKind>,
    /// Number of closed-loop steps.
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Random seed (Monte Carlo run i uses seed + i).
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => load_preset(name)?,
            (None, None) => bail!("one of --config or --preset is required"),
        };
        if let Some(kind) = self.trajectory {
            cfg.trajectory.kind = kind;
        }
        if let Some(steps) = self.steps {
            cfg.steps = steps;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// ensemble, single-ald:<i>, rls or oracle (defaults to the configured one).
    #[arg(long, value_name = "NAME")]
    controller: Option<ControllerKind>,
    /// Destination of the trace CSV.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of runs per controller.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Inclusive step window `lo:hi` for the tracking error. Episodes run
    /// `hi` steps unless --steps is given.
    #[arg(long, default_value = "10:100", value_name = "LO:HI")]
    window: Window,
    /// Comma-separated controllers, all evaluated on the same noise.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ensemble,rls,single-ald:0,oracle",
        value_name = "LIST"
    )]
    controllers: Vec<ControllerKind>,
    /// Destination of the summary CSV.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(c) = args.controller {
        cfg.controller = c;
    }
    let trace = run_episode(&cfg)?;
    write_trace_csv(&trace, &args.out, args.force)?;
    let j = accumulated_error(&trace, Window::new(1, trace.len()))?;
    eprintln!(
        "{}: {} steps, seed {}, mean squared tracking error {j:.6e} -> {}",
        cfg.controller,
        trace.len(),
        cfg.seed,
        args.out.display()
    );
    Ok(())
}

fn montecarlo(args: &MonteCarloArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if args.config.steps.is_none() {
        cfg.steps = args.window.hi;
    }
    if args.controllers.is_empty() {
        bail!("--controllers must name at least one controller");
    }
    let summaries = compare_controllers(&cfg, &args.controllers, args.runs, args.window)?;
    write_summary_csv(&summaries, &args.out, args.force)?;
    for s in &summaries {
        eprintln!(
            "{:<14} runs ok {:>4}  failed {:>4}  mean J {:.6e}",
            s.controller.to_string(),
            s.runs_ok(),
            s.runs_failed(),
            s.j_bar
        );
    }
    eprintln!("summary -> {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args).context("simulate failed"),
        Command::Montecarlo(args) => montecarlo(args).context("montecarlo failed"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
