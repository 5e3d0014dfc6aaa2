//! Command-line driver for the cavity-polariton scattering toolkit.
//!
//! Subcommands simulate multilayer cavity spectra, synthesize polariton
//! scattering spectra, fit line shapes and dispersion relations, and regress
//! branch strengths against photon weights. All outputs are plain CSV, text,
//! or JSON, each accompanied by a run manifest; identical configuration and
//! seed reproduce every byte.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use polarscat::dispersion::DispersionError;
use polarscat::io::IoError;
use polarscat::lineshape::LineshapeError;
use polarscat::scattermodel::ScatterModelError;
use polarscat::tmm::TmmError;

/// A subcommand failure, bucketed by exit code: 2 for configuration or input
/// schema problems, 3 for fit and analysis failures, 4 for file-system errors.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Analysis(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Analysis(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::File(inner) => Failure::Io(inner.to_string()),
            other => Failure::Schema(other.to_string()),
        }
    }
}

impl From<TmmError> for Failure {
    fn from(e: TmmError) -> Self {
        Failure::Schema(e.to_string())
    }
}

impl From<DispersionError> for Failure {
    fn from(e: DispersionError) -> Self {
        match e {
            DispersionError::BadSeries(_)
            | DispersionError::MissingStrengths
            | DispersionError::Spectrum(_) => Failure::Schema(e.to_string()),
            _ => Failure::Analysis(e.to_string()),
        }
    }
}

impl From<LineshapeError> for Failure {
    fn from(e: LineshapeError) -> Self {
        Failure::Analysis(e.to_string())
    }
}

impl From<ScatterModelError> for Failure {
    fn from(e: ScatterModelError) -> Self {
        match e {
            ScatterModelError::InvalidLaw(_) => Failure::Schema(e.to_string()),
            _ => Failure::Analysis(e.to_string()),
        }
    }
}

/// Flags every subcommand shares.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory the outputs and manifest are written to.
    #[arg(long, value_name = "PATH", default_value = "out")]
    pub out_dir: PathBuf,
    /// Replaces the seed given in the configuration.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Dotted-path configuration override, e.g. `--set oscillator.v_ev=0.075`.
    /// May be given multiple times.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Suppress progress and report output on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input CSV; defaults to the conventional file in the output directory.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(
    name = "polarscat",
    version,
    about = "Cavity spectrum simulation and polariton scattering analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the configured stack and write R/T/A spectra
    Simulate(CommonArgs),
    /// Synthesize polariton scattering spectra for the configured points
    SynthScatter(CommonArgs),
    /// Fit the two-peak line shape to scattering spectra
    FitSpectrum(InputArgs),
    /// Fit the coupling strength to a detuning series
    FitDispersion(InputArgs),
    /// Regress branch strengths against Hopfield photon weights
    Hopfield(InputArgs),
    /// Simulate every sweep point and extract the branch dispersion
    Sweep(CommonArgs),
    /// Run the full pipeline and write a combined report
    Report(CommonArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => commands::load_ctx(args).and_then(|c| commands::simulate(&c)),
        Command::SynthScatter(args) => {
            commands::load_ctx(args).and_then(|c| commands::synth_scatter(&c))
        }
        Command::FitSpectrum(args) => commands::load_ctx(&args.common)
            .and_then(|c| commands::fit_spectrum(&c, args.input.as_deref())),
        Command::FitDispersion(args) => commands::load_ctx(&args.common)
            .and_then(|c| commands::fit_dispersion(&c, args.input.as_deref())),
        Command::Hopfield(args) => commands::load_ctx(&args.common)
            .and_then(|c| commands::hopfield(&c, args.input.as_deref())),
        Command::Sweep(args) => commands::load_ctx(args).and_then(|c| commands::sweep(&c)),
        Command::Report(args) => commands::load_ctx(args).and_then(|c| commands::report(&c)),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
