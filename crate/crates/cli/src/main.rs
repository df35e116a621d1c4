//! Command-line interface: configure runs, execute them, persist results,
//! run the verification suite, sweep parameter grids, and split series files
//! for plotting.

mod commands;
mod config;
mod outputs;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Config-class problems (unreadable/invalid input) exit with 2; runtime
/// problems (I/O while writing, failed verification) exit with 1. Physics
/// outcomes such as cone exits are results, not errors: they land in
/// summary.json with exit status 0.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

const ENV_HELP: &str = "Environment:
  ANISOFLOW_SEED          u64 sampler seed for `verify` (default: built-in)
  ANISOFLOW_FAULT_INJECT  check id whose `verify` row is forced to FAIL;
                          negative control for the reporting pipeline";

#[derive(Parser)]
#[command(name = "anisoflow", version, after_help = ENV_HELP,
          about = "Contracting curvature flows of star-shaped axisymmetric hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve one configured surface; writes series.csv, snapshots/, summary.json
    Run {
        /// experiment description in TOML
        config: PathBuf,
    },
    /// Run the built-in verification suite and print a pass/fail table
    Verify,
    /// Run every combination in the [sweep] lists; per-cell artifacts plus sweep.csv
    Sweep {
        /// experiment description with a [sweep] section
        config: PathBuf,
    },
    /// Split a series.csv into per-observable two-column .dat files
    EmitPlot {
        /// series.csv produced by `run`
        series: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config } => commands::cmd_run(&config),
        Cmd::Verify => commands::cmd_verify(),
        Cmd::Sweep { config } => commands::cmd_sweep(&config),
        Cmd::EmitPlot { series } => commands::cmd_emit_plot(&series),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
