//! `firkit`: simulate a model and run the Kalman, RHKF and UFIR estimators
//! on it.
//!
//! Exit codes: 0 on success, 2 for bad arguments or configuration, 3 when an
//! estimator fails numerically (singular matrix, unobservable window,
//! unsupported model).

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Report;
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "firkit",
    version,
    about = "Finite-horizon state estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write every filter's estimates.
    Run(CommonArgs),
    /// Monte-Carlo MSE over the horizon grid.
    Sweep(CommonArgs),
    /// Monte-Carlo comparison of the configured filters.
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `output` in the config. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the simulation seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

type Action = fn(&config::Experiment) -> Result<Report, CliError>;

fn execute(cli: Cli) -> Result<(), CliError> {
    let (args, action): (CommonArgs, Action) = match cli.command {
        Command::Run(a) => (a, commands::run),
        Command::Sweep(a) => (a, commands::sweep),
        Command::Compare(a) => (a, commands::compare),
    };
    let cfg = ExperimentConfig::load(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut exp = cfg.prepare(base)?;
    if let Some(seed) = args.seed {
        exp.sim.seed = seed;
    }
    let report = action(&exp)?;
    match args.out.or(exp.output) {
        Some(path) => {
            std::fs::write(&path, &report.csv)
                .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
            print!("{}", report.summary);
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(report.csv.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::config(format!("cannot write output: {e}")))?;
            eprint!("{}", report.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
