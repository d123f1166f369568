//! `peac`: simulation, estimation, and benchmarking of differential-phase
//! estimators for correlated interferometer signals.
//!
//! The binary is a thin shell over the `peac` library: it parses configs,
//! dispatches to library calls, and writes manifest-stamped artifacts. Exit
//! codes are machine-parseable: 0 success, 2 config error, 3 data error,
//! 4 numerical failure.

mod benchmark;
mod config;
mod estimate;
mod gamma;
mod manifest;
mod simulate;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Error classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unusable configuration (exit 2).
    Config(String),
    /// Unusable input data (exit 3).
    Data(String),
    /// Estimation or replication failed numerically (exit 4).
    Numerical(String),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "peac",
    version,
    about = "Differential-phase estimation from amplitude collapse, with ellipse-fit baseline",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate multi-channel fringe datasets over a T or theta grid.
    Simulate {
        /// Simulation config JSON ({} gives the reference protocol).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset CSV; a <out>.meta.json manifest is written beside it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate per-T amplitudes, theta(T), and the acceleration from a dataset CSV.
    Estimate {
        /// Input dataset CSV.
        dataset: PathBuf,
        /// Estimation route: collapse-law (peac), conic fit (ellipse), or both.
        #[arg(long, value_enum, default_value_t = estimate::Route::Peac)]
        method: estimate::Route,
        /// Optional estimation config JSON (pulse constants, bootstrap size).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output report JSON (embeds the run manifest).
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo bias/precision benchmark of the three estimators.
    Benchmark {
        /// Replication config JSON (theta_grid required, the rest defaulted).
        #[arg(long)]
        config: PathBuf,
        /// Output stem: writes <out>.curves.csv and <out>.summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of ellipse, peac_sum, peac_diff (default all).
        #[arg(long)]
        method: Option<String>,
    },
    /// Reproduce the finite-pulse correction coefficient gamma.
    GammaFit {
        /// Optional config JSON (pulse duration, T grid).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }
    let result = match &cli.command {
        Command::Simulate { config, out } => simulate::run(config, out, cli.seed),
        Command::Estimate {
            dataset,
            method,
            config,
            out,
        } => estimate::run(dataset, *method, config.as_deref(), out, cli.seed),
        Command::Benchmark {
            config,
            out,
            method,
        } => benchmark::run(config, out, method.as_deref(), cli.seed),
        Command::GammaFit { config, out } => gamma::run(config.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
