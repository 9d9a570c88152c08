use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod args;
mod commands;
mod config;
mod failure;
mod inspect;

use args::{CurveArgs, EvaluateArgs, InspectArgs, PredictArgs, SimulateArgs, TrainArgs};
use failure::Failure;

/// Sharing pattern submodels: fit, evaluate and inspect linear and logistic
/// models specialized per missingness pattern.
#[derive(Parser)]
#[command(name = "spsm", version, about)]
struct Cli {
    /// JSON file with default values for the command's options; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress (-v) or solver detail (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a CSV file and write it as JSON.
    Train(TrainArgs),
    /// Predict with a saved model; one row per input row.
    Predict(PredictArgs),
    /// Score one or more saved models on a labelled CSV file.
    Evaluate(EvaluateArgs),
    /// Draw a synthetic data set (settings A, B, C).
    Simulate(SimulateArgs),
    /// Show the pattern-specific coefficients of a saved model.
    Inspect(InspectArgs),
    /// Learning curve over training fractions and split seeds.
    Curve(CurveArgs),
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("SPSM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::input(format!("SPSM_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::internal(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    let config = cli.config.as_deref();
    match cli.command {
        Command::Train(a) => commands::train(config::resolve(a, config)?),
        Command::Predict(a) => commands::predict(config::resolve(a, config)?),
        Command::Evaluate(a) => commands::evaluate(config::resolve(a, config)?),
        Command::Simulate(a) => commands::simulate(config::resolve(a, config)?),
        Command::Inspect(a) => inspect::run(config::resolve(a, config)?),
        Command::Curve(a) => commands::curve(config::resolve(a, config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
