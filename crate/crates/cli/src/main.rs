//! `rfs-swarm`: run swarm scenarios, plot cost surfaces and exercise the
//! PHD filter from the command line.
//!
//! Exit status is 0 on success, 1 when a run fails and 2 for usage or
//! configuration errors.

mod config;
mod output;
mod phd_demo;
mod simulate;
mod surface;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfs_swarm::CostKind;
use thiserror::Error;

use config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] rfs_swarm::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rfs-swarm", version, about = "Gaussian-mixture swarm control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv, summary.csv, snapshots.svg and means.svg.
    Simulate(SimulateCmd),
    /// Sweep one density over a grid and write the cost surface as CSV and SVG.
    Surface(SurfaceCmd),
    /// Run the PHD filter on synthetic measurements and write per-step estimates.
    PhdDemo(PhdDemoCmd),
}

#[derive(Debug, Args)]
struct SimulateCmd {
    /// Built-in case 1 to 4 (default 2, or the config file's `case`).
    #[arg(long)]
    case: Option<u32>,
    /// Scenario config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start case 1 from the near grid (±1.5, ±1.5).
    #[arg(long)]
    near: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Snapshot times in seconds, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snapshots: Option<Vec<f64>>,
    #[arg(long)]
    no_csv: bool,
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Args)]
struct SurfaceCmd {
    /// Cost: cs, l2 or l2quad.
    #[arg(long)]
    kind: CostKind,
    #[arg(long, default_value_t = 2)]
    case: u32,
    /// Index of the swept density (0-based).
    #[arg(long, default_value_t = 0)]
    probe: usize,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    xmin: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    xmax: f64,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    ymin: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    ymax: f64,
    #[arg(long, default_value_t = 81)]
    nx: usize,
    #[arg(long, default_value_t = 81)]
    ny: usize,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PhdDemoCmd {
    /// Demo config file; built-in single-target defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, default_value = "results/phd_demo.csv")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(c) => simulate::run(&simulate::SimulateArgs {
            case: c.case,
            config: c.config,
            near: c.near,
            seed: c.seed,
            steps: c.steps,
            out: c.out,
            csv: !c.no_csv,
            svg: !c.no_svg,
            snapshots: c.snapshots,
        }),
        Command::Surface(c) => surface::run(&surface::SurfaceArgs {
            kind: c.kind,
            case: c.case,
            probe: c.probe,
            x_range: (c.xmin, c.xmax),
            y_range: (c.ymin, c.ymax),
            nx: c.nx,
            ny: c.ny,
            out: c.out,
        }),
        Command::PhdDemo(c) => phd_demo::run(&phd_demo::PhdDemoArgs {
            config: c.config,
            out: c.out,
            seed: c.seed,
            steps: c.steps,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
