//! `rankforge`: fit, validate and run ordinal probit ratings from match CSVs.

mod common;
mod rank;
mod scores;
mod synth;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "rankforge",
    version,
    about = "Ordinal probit ratings for volleyball matches"
)]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "RANKFORGE_THREADS")]
    threads: Option<usize>,
    /// Model parameters as JSON (or a previous output); flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leave-one-out validation and hyper-parameter search.
    Validate(validate::ValidateArgs),
    /// Online ranking through the match list.
    Rank(rank::RankArgs),
    /// Sample a synthetic dataset from the model.
    Synth(synth::SynthArgs),
    /// Matched numerical scores for a set of thresholds.
    Scores(scores::ScoresArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let threads = rayon::current_num_threads();
    let config = cli.config.as_deref();
    let result = match &cli.command {
        Command::Validate(a) => validate::run(a, config, threads),
        Command::Rank(a) => rank::run(a, config, threads),
        Command::Synth(a) => synth::run(a, config, threads),
        Command::Scores(a) => scores::run(a, config, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
