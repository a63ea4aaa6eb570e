//! Command-line driver: single simulations, convergence studies and the
//! quadratic-potential experiment, each configured by a flat TOML file.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing::error;
use tracing_subscriber::EnvFilter;

use config::{Case, ExperimentConfig, Overrides};
use run::Command;

#[derive(Parser)]
#[command(name = "laguerre-flow", version, about = "Particle gradient flows on Laguerre tessellations")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// More log output; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Sub {
    /// Run one simulation of the configured case.
    Simulate(Common),
    /// Run every (gamma, N) pair of a self-similar study and tabulate rates.
    Study(Common),
    /// Relax a cross-shaped particle cloud under a quadratic potential.
    Cross(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; every key is optional.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Seed recorded with the run, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(short, long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();

    let (cmd, args, case) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a, None),
        Sub::Study(a) => (Command::Study, a, Some(Case::Barenblatt)),
        Sub::Cross(a) => (Command::Cross, a, Some(Case::Cross)),
    };
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        error!("--workers must be at least 1");
        return ExitCode::from(2);
    }
    let file = match &args.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    };
    let resolved = file.and_then(|cfg| config::resolve(cfg, Overrides { case, output: args.output, seed: args.seed }));
    let resolved = match resolved {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    match run::execute(cmd, &resolved, workers) {
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
        Ok(Err(failure)) => {
            error!("run failed: {}", failure.message);
            for f in failure.written {
                println!("{}", f.display());
            }
            ExitCode::FAILURE
        }
        Ok(Ok(files)) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
    }
}
