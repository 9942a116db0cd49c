//! `perishgood`: equilibrium effort experiments on networks.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when a solve does not
//! converge.

mod commands;
mod output;
mod spec;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use spec::{ExperimentSpec, SpecArgs};

#[derive(Parser, Debug)]
#[command(
    name = "perishgood",
    version,
    about = "Equilibrium effort for perishable information goods on networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for an equilibrium and certify uniqueness
    Solve(SpecArgs),
    /// Solve over a list of shelf-lives
    Sweep(SpecArgs),
    /// Smallest adjacency eigenvalue and the uniqueness threshold
    Spectral(SpecArgs),
    /// Shelf-life and originator concentration from a post log
    Ingest(SpecArgs),
    /// Concentration metrics for a volume vector or a fresh equilibrium
    Metrics(SpecArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("PERISHGOOD_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            anyhow::anyhow!("PERISHGOOD_THREADS must be a positive integer, got {value:?}")
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    configure_threads()?;
    let (args, handler): (&SpecArgs, fn(&ExperimentSpec) -> anyhow::Result<Status>) =
        match &cli.command {
            Command::Solve(a) => (a, commands::cmd_solve),
            Command::Sweep(a) => (a, commands::cmd_sweep),
            Command::Spectral(a) => (a, commands::cmd_spectral),
            Command::Ingest(a) => (a, commands::cmd_ingest),
            Command::Metrics(a) => (a, commands::cmd_metrics),
        };
    handler(&ExperimentSpec::resolve(args)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Status::Converged) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
