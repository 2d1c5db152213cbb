//! Benchmark CLI: dataset ingestion, chi-square feature selection, model
//! training, prediction, and the one-vs-all recall comparison.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage error.

mod commands;
mod data;
mod opts;

use std::process::ExitCode;

use clap::Parser;

use opts::{runtime, Cli, CliError, Command, ConfigFile};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let jobs = match cli.jobs {
        Some(value) => Some(value),
        None => file.get("jobs")?,
    };
    if let Some(jobs) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|error| runtime(format!("thread pool: {error}")))?;
    }
    match &cli.command {
        Command::Evaluate(args) => commands::evaluate(args, &file),
        Command::Train(args) => commands::train(args, &file),
        Command::Predict(args) => commands::predict(args, &file),
        Command::SelectFeatures(args) => commands::select_features(args, &file),
    }
}
