mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use erdf::Error;

use commands::{AblateArgs, DiagnosticsArgs, EvalArgs, PredictArgs, SynthArgs, TrainArgs};

/// Environment variable that caps the number of worker threads.
const THREADS_VAR: &str = "ERDF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "erdf", version, about = "Label distribution learning with enhanced deep forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a cascade and write the model file
    Train(TrainArgs),
    /// Report test-set metrics, as mean ± std over seeds
    Eval(EvalArgs),
    /// Predict label distributions for a feature file
    Predict(PredictArgs),
    /// Compare the four ablation variants
    Ablate(AblateArgs),
    /// Export heatmap, radar and trajectory data
    Diagnostics(DiagnosticsArgs),
    /// Generate a synthetic dataset
    Synth(SynthArgs),
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::ConfigInvalid(format!("{THREADS_VAR}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::ConfigInvalid(e.to_string()))
}

fn run(cli: &Cli) -> Result<String, Error> {
    configure_threads()?;
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Diagnostics(a) => commands::diagnostics(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
