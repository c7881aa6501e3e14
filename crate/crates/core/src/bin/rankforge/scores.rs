use std::path::{Path, PathBuf};

use clap::Args;
use rankforge::model::{
    check_convexity, implicit_loss, implicit_loss_d1, implicit_loss_d2, implicit_loss_d3, matched_scores,
    ConvexityReport, ZGrid,
};
use rankforge::{NumericalScores, Thresholds};
use serde::Serialize;

use crate::common::{emit_json, CliResult, ParamArgs, RunConfig};

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoresArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Score of the clearest win.
    #[arg(long, default_value_t = 2.0)]
    pub r0: f64,
    /// Compare the implicit-loss derivatives with finite differences.
    #[arg(long)]
    pub fd_check: bool,
    #[arg(long, default_value_t = -8.0, allow_hyphen_values = true)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = 4001)]
    pub grid_points: usize,
    /// Report JSON; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FdCheck {
    points: usize,
    step: f64,
    /// Largest `|analytic - fd| / max(1, |fd|)` per derivative order.
    max_error: [f64; 3],
    pass: bool,
}

#[derive(Serialize)]
struct ScoresOutput {
    thresholds: Vec<f64>,
    matched_scores: Vec<f64>,
    convexity: ConvexityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    fd_check: Option<FdCheck>,
}

fn fd_check(c: &Thresholds, r: &NumericalScores) -> FdCheck {
    let mut max_error = [0.0f64; 3];
    let mut points = 0;
    let fd = |f: &dyn Fn(f64) -> f64, z: f64| (f(z + FD_STEP) - f(z - FD_STEP)) / (2.0 * FD_STEP);
    for y in 0..c.levels() {
        for i in 0..=100 {
            let z = -5.0 + 0.1 * i as f64;
            let pairs = [
                (
                    implicit_loss_d1(y, z, c, r),
                    fd(&|u| implicit_loss(y, u, c, r), z),
                ),
                (
                    implicit_loss_d2(y, z, c, r),
                    fd(&|u| implicit_loss_d1(y, u, c, r), z),
                ),
                (
                    implicit_loss_d3(y, z, c, r),
                    fd(&|u| implicit_loss_d2(y, u, c, r), z),
                ),
            ];
            for (k, (a, n)) in pairs.into_iter().enumerate() {
                max_error[k] = max_error[k].max((a - n).abs() / n.abs().max(1.0));
            }
            points += 1;
        }
    }
    FdCheck {
        points,
        step: FD_STEP,
        max_error,
        pass: max_error.iter().all(|&e| e <= FD_TOL),
    }
}

pub fn run(args: &ScoresArgs, config: Option<&Path>, threads: usize) -> CliResult<()> {
    let p = args.params.resolve(config)?;
    let r = matched_scores(&p.thresholds, args.r0)?;
    let grid = ZGrid {
        lo: args.grid_lo,
        hi: args.grid_hi,
        points: args.grid_points,
    };
    let check = args.fd_check.then(|| fd_check(&p.thresholds, &r));
    let failed = check.as_ref().is_some_and(|c| !c.pass);
    let out = ScoresOutput {
        thresholds: p.thresholds.interior().to_vec(),
        matched_scores: r.values().to_vec(),
        convexity: check_convexity(&p.thresholds, &r, grid),
        fd_check: check,
    };
    let cfg = RunConfig {
        version: crate::common::VERSION,
        command: "scores",
        threads,
        args,
        params: &p,
    };
    emit_json(args.out.as_deref(), &cfg, &out)?;
    if failed {
        return Err("finite-difference check failed".into());
    }
    Ok(())
}
