use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use rankforge::dataset::{load_skills, Dataset, GroundTruth};
use rankforge::online::{
    fivb_notation, run as run_online, step_search, write_trace, OnlineReport, RankState, StepSearch,
};
use rankforge::{LossKind, ModelParams};
use serde::Serialize;

use crate::common::{create_csv, emit_json, CliResult, DataArgs, LossArg, ParamArgs, RunConfig};

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Initial skills CSV `team,skill` on the display scale; zero when absent.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LossArg::Fivb)]
    pub loss: LossArg,
    /// Try each step size and keep the one with the smallest average loss.
    #[arg(long, value_delimiter = ',')]
    pub mu_search: Option<Vec<f64>>,
    /// Reference skills (`team,skill` CSV or ground-truth JSON) for the
    /// rank correlation.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Per-match records in FIVB notation (JSON).
    #[arg(long)]
    pub compat: Option<PathBuf>,
    /// Per-step trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Final ranking CSV.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Report JSON; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RankOutput {
    report: OnlineReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_search: Option<StepSearch>,
}

fn skills_by_team(path: &Path) -> CliResult<HashMap<String, f64>> {
    if path.extension().is_some_and(|e| e == "json") {
        let raw: serde_json::Value = serde_json::from_reader(File::open(path)?)?;
        // accept both the bare ground truth and the output of `synth`
        let truth: GroundTruth = serde_json::from_value(raw.get("truth").cloned().unwrap_or(raw))?;
        return Ok(truth.skills.into_iter().collect());
    }
    Ok(load_skills(path)?)
}

fn aligned(d: &Dataset, skills: &HashMap<String, f64>) -> CliResult<Vec<f64>> {
    d.teams
        .iter()
        .map(|t| {
            skills
                .get(t)
                .copied()
                .ok_or_else(|| format!("no skill for team `{t}`").into())
        })
        .collect()
}

fn compat_records(d: &Dataset, init: &[f64], p: &ModelParams, kind: LossKind, path: &Path) -> CliResult<()> {
    let mut state = RankState::new(init.to_vec(), p.clone(), kind);
    let mut records = Vec::with_capacity(d.len());
    for rec in &d.matches {
        records.push(fivb_notation(rec, &state)?);
        state.step(rec);
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &records)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn run(args: &RankArgs, config: Option<&Path>, threads: usize) -> CliResult<()> {
    let mut p = args.params.resolve(config)?;
    let kind: LossKind = args.loss.into();
    let d = args.data.load(&p)?;
    let init = match &args.init {
        Some(path) => aligned(&d, &skills_by_team(path)?)?,
        None => vec![0.0; d.team_count()],
    };
    let reference = match &args.reference {
        Some(path) => Some(vec![aligned(&d, &skills_by_team(path)?)?; d.len()]),
        None => None,
    };
    let search = match &args.mu_search {
        Some(mus) => {
            let s = step_search(&d, &init, &p, kind, mus, reference.as_deref())?;
            p.mu = s.best_mu;
            Some(s)
        }
        None => None,
    };
    let cfg = RunConfig {
        version: crate::common::VERSION,
        command: "rank",
        threads,
        args,
        params: &p,
    };
    let result = run_online(&d, &init, &p, kind, reference.as_deref())?;
    if let Some(path) = &args.trace {
        write_trace(&result.trace, create_csv(path, &cfg)?)?;
    }
    if let Some(path) = &args.ranking {
        let mut w = csv::Writer::from_writer(create_csv(path, &cfg)?);
        w.write_record(["rank", "team", "skill"])?;
        for (i, e) in result.report.final_ranking.iter().enumerate() {
            w.write_record([(i + 1).to_string(), e.team.clone(), e.skill.to_string()])?;
        }
        w.flush()?;
    }
    if let Some(path) = &args.compat {
        compat_records(&d, &init, &p, kind, path)?;
    }
    emit_json(
        args.out.as_deref(),
        &cfg,
        &RankOutput {
            report: result.report,
            step_search: search,
        },
    )
}
