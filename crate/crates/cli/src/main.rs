//! `andersen`: run Andersen-dynamics simulations and coupling experiments.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 simulation
//! failure, 3 selftest failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "andersen", version, about = "Andersen dynamics and its couplings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump one single-copy trajectory on the record grid.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Replica stream to draw from.
        #[arg(long, default_value_t = 0)]
        replica: u64,
    },
    /// Estimate E[distance] between coupled copies over time.
    Couple(RunArgs),
    /// Repeat `couple` over the values in the [sweep] section.
    Sweep(RunArgs),
    /// Print contraction rates and theorem conditions as JSON.
    Check(CheckArgs),
    /// Run the built-in invariant suites.
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config, or a JSON meta sidecar from an earlier run.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set dynamics.beta=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// CSV destination (stdout when absent).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// JSON sidecar destination.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

/// Either torus (`--ell`) or Euclidean (`--sigma-max`) parameters.
#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, conflicts_with = "lambda_per_m", required_unless_present = "lambda_per_m")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda_per_m: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, conflicts_with_all = ["sigma_max", "lg"], required_unless_present = "sigma_max")]
    pub ell: Option<f64>,
    #[arg(long = "L", default_value_t = 0.0)]
    pub l: f64,
    #[arg(long = "J", default_value_t = 0.0)]
    pub j: f64,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lg: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Simulate { run, replica } => commands::simulate(&run, replica),
        Command::Couple(run) => commands::couple(&run),
        Command::Sweep(run) => commands::sweep(&run),
        Command::Check(args) => commands::check(&args),
        Command::Selftest { seed } => commands::selftest(seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.inner);
            ExitCode::from(e.code)
        }
    }
}
