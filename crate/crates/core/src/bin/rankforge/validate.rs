use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rankforge::alo::{
    alo_with, exact_loo, gamma_sweep, optimize_hyper, solve_preset, write_sweep_csv, AloReport, FreeSet,
    HyperOptResult, Optimizer, OptimizerOptions, Preset, SweepRow,
};
use rankforge::model::matched_scores;
use rankforge::LossKind;
use serde::Serialize;

use crate::common::{create_csv, emit_json, CliResult, DataArgs, LossArg, ParamArgs, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Alo,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerArg {
    Gd,
    Bfgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = Method::Alo)]
    pub method: Method,
    /// Largest dataset exact leave-one-out will run on.
    #[arg(long = "max-T", default_value_t = 400)]
    pub max_t: usize,
    /// Run exact leave-one-out whatever the dataset size.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value = "fivb")]
    pub case: Preset,
    /// Free hyper-parameters (`c,eta,r,xi,gamma`), replacing those of `--case`.
    #[arg(long)]
    pub free: Option<String>,
    /// Training loss; defaults to the one of `--case`.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Solve the case at each of these penalties.
    #[arg(long, value_delimiter = ',', requires = "sweep_out")]
    pub gammas: Option<Vec<f64>>,
    /// Sweep CSV.
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Gd)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    /// Report JSON; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScoreComparison {
    thresholds: Vec<f64>,
    matched: Vec<f64>,
    optimized: Vec<f64>,
}

#[derive(Serialize)]
struct ValidateOutput {
    report: Option<AloReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimization: Option<HyperOptResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matched_scores: Option<ScoreComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<Vec<SweepRow>>,
}

pub fn run(args: &ValidateArgs, config: Option<&Path>, threads: usize) -> CliResult<()> {
    let base = args.params.resolve(config)?;
    let d = args.data.load(&base)?;
    let kind: LossKind = args.loss.map(Into::into).unwrap_or(args.case.kind());
    let custom = args.free.as_deref().map(FreeSet::parse).transpose()?;
    let free = custom.unwrap_or(args.case.free());
    let start = if custom.is_some() {
        base.clone()
    } else {
        args.case.start(&base)
    };
    let cfg = RunConfig {
        version: crate::common::VERSION,
        command: "validate",
        threads,
        args,
        params: &start,
    };
    let opts = OptimizerOptions {
        method: match args.optimizer {
            OptimizerArg::Gd => Optimizer::GradientDescent,
            OptimizerArg::Bfgs => Optimizer::Bfgs,
        },
        max_iter: args.max_iter,
        grad_tol: args.grad_tol,
        ..Default::default()
    };

    let mut out = ValidateOutput {
        report: None,
        optimization: None,
        matched_scores: None,
        sweep: None,
    };

    if args.method == Method::Exact {
        if !free.is_empty() {
            return Err(
                "exact leave-one-out evaluates fixed parameters; use --case fivb or --method alo".into(),
            );
        }
        if d.len() > args.max_t && !args.force {
            return Err(format!(
                "exact leave-one-out over {} matches exceeds --max-T {}; pass --force to run it anyway",
                d.len(),
                args.max_t
            )
            .into());
        }
        out.report = Some(exact_loo(&d, &start, kind)?);
        return emit_json(args.out.as_deref(), &cfg, &out);
    }

    if let Some(gammas) = &args.gammas {
        let rows = if custom.is_some() {
            gammas
                .iter()
                .map(|&g| {
                    let p = start.clone().with_gamma(g);
                    match optimize_hyper(&d, kind, free, &p, &opts) {
                        Ok(r) => SweepRow {
                            gamma: g,
                            result: Some(r),
                            error: None,
                        },
                        Err(e) => SweepRow {
                            gamma: g,
                            result: None,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        } else {
            gamma_sweep(&d, args.case, kind, &base, gammas, &opts)?
        };
        let path = args.sweep_out.as_deref().expect("clap requires --sweep-out");
        write_sweep_csv(&rows, &free.names(&start), create_csv(path, &cfg)?)?;
        if rows.iter().all(|r| r.result.is_none()) {
            emit_json(
                args.out.as_deref(),
                &cfg,
                &ValidateOutput {
                    sweep: Some(rows),
                    ..out
                },
            )?;
            return Err("every point of the sweep failed".into());
        }
        out.sweep = Some(rows);
        return emit_json(args.out.as_deref(), &cfg, &out);
    }

    let solved = if free.is_empty() {
        start.clone()
    } else {
        let r = if custom.is_some() {
            optimize_hyper(&d, kind, free, &start, &opts)?
        } else {
            solve_preset(&d, args.case, kind, &base, &opts)?
        };
        let p = r.params.clone();
        out.optimization = Some(r);
        p
    };
    out.report = Some(alo_with(&d, &solved, kind, &opts.fit)?);
    if free.scores {
        out.matched_scores = Some(ScoreComparison {
            thresholds: solved.thresholds.interior().to_vec(),
            matched: matched_scores(&solved.thresholds, solved.scores.get(0))?
                .values()
                .to_vec(),
            optimized: solved.scores.values().to_vec(),
        });
    }
    emit_json(args.out.as_deref(), &cfg, &out)
}
