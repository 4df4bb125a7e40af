//! Batch front end for the light-shift gate simulator: TOML configs in, CSV tables and
//! JSON sidecars out.

pub mod config;
pub mod error;
pub mod execute;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{validate_config, ConfigDocument, Experiment, Overrides, RunConfig};
pub use error::CliError;
pub use execute::{compute, execute, Outcome};

#[derive(Debug, Parser)]
#[command(name = "otdf", version, about = "Two-ion light-shift gate simulations and analyses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bell-sequence populations against gate detuning.
    DetuningScan(RunArgs),
    /// Parity against analysis phase.
    ParityScan(RunArgs),
    /// Simulated Bell state, sampled count histograms and the fidelity estimate.
    BellRun(RunArgs),
    /// Maximum-likelihood populations of stored histograms.
    FitHistogram(RunArgs),
    /// Bootstrap confidence interval of a population statistic.
    Bootstrap(RunArgs),
    /// Gate error budget.
    Budget(RunArgs),
    /// Lattice mismatch calibration from the resonant breathing-mode excitation.
    CalibrateSpacing(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML or JSON run configuration; the preset alone is used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub preset: Option<String>,
}

impl Command {
    pub fn split(&self) -> (Experiment, &RunArgs) {
        match self {
            Command::DetuningScan(a) => (Experiment::DetuningScan, a),
            Command::ParityScan(a) => (Experiment::ParityScan, a),
            Command::BellRun(a) => (Experiment::BellRun, a),
            Command::FitHistogram(a) => (Experiment::FitHistogram, a),
            Command::Bootstrap(a) => (Experiment::Bootstrap, a),
            Command::Budget(a) => (Experiment::Budget, a),
            Command::CalibrateSpacing(a) => (Experiment::CalibrateSpacing, a),
        }
    }
}

/// Reads and resolves the configuration named on the command line.
pub fn load_config(experiment: Experiment, args: &RunArgs) -> Result<RunConfig, CliError> {
    let (text, base) = match &args.config {
        Some(path) => (
            std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
            path.parent().map(Path::to_path_buf),
        ),
        None => (String::new(), None),
    };
    let overrides = Overrides {
        experiment: Some(experiment),
        seed: args.seed,
        out_dir: args.out.clone(),
        preset: args.preset.clone(),
    };
    validate_config(&text, base.as_deref(), &overrides)
}

/// Full command: load, run, write. Returns the written paths.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let (experiment, args) = cli.command.split();
    let rc = load_config(experiment, args)?;
    execute(&rc)
}
