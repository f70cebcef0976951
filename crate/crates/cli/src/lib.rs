//! `critlab`: config-driven front end for spectral checks, classification,
//! simulation, phase sweeps and noise probes.
//!
//! Exit codes: 0 ok, 2 matrix not primitive, 3 matrix not critical,
//! 4 config or parse error, 5 runtime failure (including overflow).

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use critlab_core::Error;

pub mod commands;
pub mod config;

#[derive(Debug, Parser)]
#[command(name = "critlab", version, about = "Near-critical growth process laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Perron-Frobenius data and primitivity power of a matrix file.
    Spectral {
        matrix_file: PathBuf,
        /// Divide by λ₁ before reporting instead of requiring λ₁ = 1.
        #[arg(long)]
        rescale: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recurrence/transience verdict as JSON.
    Classify(RunArgs),
    /// Trajectory CSV.
    Simulate(RunArgs),
    /// One ensemble per `sweep_values` entry, as CSV.
    Sweep(RunArgs),
    /// Empirical noise moments at `probe_x`, as CSV.
    Probe(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `n_traj`.
    #[arg(long)]
    pub traj: Option<u64>,
    #[arg(long, env = "CRITLAB_THREADS")]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 5, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotPrimitive { .. } => 2,
            Error::NotCritical(_) => 3,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::DimensionMismatch { .. } => 4,
            Error::NonConvergence { .. }
            | Error::NumericOverflow { .. }
            | Error::NegativeDrift { .. }
            | Error::NoDivergentTrajectories => 5,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Self { code: 0, message: String::new() };
        }
        Self::runtime(format!("i/o: {e}"))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectral { matrix_file, rescale, out } => commands::spectral(&matrix_file, rescale, out.as_deref()),
        Command::Classify(args) => commands::classify(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Probe(args) => commands::probe(&args),
    }
}
