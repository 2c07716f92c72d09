//! `langevin-dp`: plan, sample, validate and run private posterior mechanisms.
//!
//! Exit codes: 0 success, 1 I/O or configuration error, 2 infeasible plan or
//! violated precondition, 3 validation failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "langevin-dp", version, about = "Certified Langevin sampling with Renyi and DP accounting")]
struct Cli {
    /// Worker threads for chains and trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose eta and T and write plan.json with its certificates.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the radius constant c.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Draw final states of independent chains following plan.json.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run named validation suites and write report.json and summary.csv.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Release private Gibbs-posterior samples with a privacy report.
    Posterior {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Re-derive every number in plan.json independently.
    Check {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Plan { config, out, c } => commands::plan(&config, &out, c),
        Command::Sample { config, seed, out } => commands::sample(&config, seed, &out),
        Command::Validate { config, seed, out, c } => commands::validate(&config, seed, &out, c),
        Command::Posterior { config, seed, out, c } => commands::posterior(&config, seed, &out, c),
        Command::Check { plan, out } => commands::check(&plan, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
