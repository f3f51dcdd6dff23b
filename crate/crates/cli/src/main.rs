//! `trivote`: reproducible pipeline runs for the majority-vote sexism
//! classifier.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{cmd_evaluate, cmd_predict, cmd_stats, cmd_train, CliError, RunContext};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "trivote",
    version,
    about = "Three encoder-based sexism classifiers combined by majority vote"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the seed from the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the output directory from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prints sentence counts for the configured datasets.
    Stats,
    /// Trains the three basic models into the output directory.
    Train,
    /// Writes per-model and ensemble predictions for the test file.
    Predict,
    /// Scores predictions against gold labels and renders reports.
    Evaluate {
        /// Adds the published-results column to the reports.
        #[arg(long)]
        baseline: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::config(anyhow::anyhow!("--config PATH is required")))?;
    let mut config = RunConfig::load(&config_path).map_err(CliError::config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.paths.out = out;
    }
    let ctx = RunContext {
        config,
        config_path,
    };
    match cli.command {
        Command::Stats => cmd_stats(&ctx),
        Command::Train => cmd_train(&ctx),
        Command::Predict => cmd_predict(&ctx),
        Command::Evaluate { baseline } => cmd_evaluate(&ctx, baseline),
    }
}
