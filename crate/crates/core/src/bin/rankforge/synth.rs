use std::path::{Path, PathBuf};

use clap::Args;
use rankforge::dataset::{synthesize, write_csv, GroundTruth, SynthOptions, FIVB_HOME_SHARE};
use serde::Serialize;

use crate::common::{create_csv, emit_json, CliResult, ParamArgs, RunConfig};

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Number of teams.
    #[arg(long, short = 'M')]
    pub teams: usize,
    /// Number of matches.
    #[arg(long, short = 'T')]
    pub matches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of matches played at the home team's venue.
    #[arg(long, default_value_t = FIVB_HOME_SHARE)]
    pub p_home: f64,
    /// Match CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Ground-truth JSON; stdout when absent.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Serialize)]
struct SynthOutput<'a> {
    teams: usize,
    matches: usize,
    truth: &'a GroundTruth,
}

pub fn run(args: &SynthArgs, config: Option<&Path>, threads: usize) -> CliResult<()> {
    let p = args.params.resolve(config)?;
    let opts = SynthOptions {
        p_home: args.p_home,
        ..Default::default()
    };
    let (d, truth) = synthesize(args.teams, args.matches, &p, args.seed, None, &opts)?;
    let cfg = RunConfig {
        version: crate::common::VERSION,
        command: "synth",
        threads,
        args,
        params: &p,
    };
    write_csv(&d, create_csv(&args.out, &cfg)?)?;
    emit_json(
        args.truth.as_deref(),
        &cfg,
        &SynthOutput {
            teams: args.teams,
            matches: args.matches,
            truth: &truth,
        },
    )
}
