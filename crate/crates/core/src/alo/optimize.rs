//! Hyper-parameter search on the approximate leave-one-out metric.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hyper::{hyper_grad_with, HyperGrad};
use super::FreeSet;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::model::{LossKind, ModelParams, Thresholds};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 40;
/// Largest first step, in parameter units, of a fresh search direction.
const FIRST_STEP: f64 = 0.1;

/// Named configurations of the validation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// FIVB thresholds, no home advantage, nothing optimized.
    Fivb,
    /// Symmetric thresholds optimized, `η = 0`.
    Thresholds,
    /// FIVB thresholds, `η` optimized.
    Hfa,
    /// Thresholds and `η` optimized together.
    Both,
    /// Implicit FIVB loss: scores and `η` optimized for the given thresholds.
    Scores,
    /// FIVB thresholds: weights `ξ_1..` and `η` optimized from `ξ = 1`.
    Weights,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fivb,
        Preset::Thresholds,
        Preset::Hfa,
        Preset::Both,
        Preset::Scores,
        Preset::Weights,
    ];

    pub fn kind(self) -> LossKind {
        match self {
            Preset::Scores => LossKind::ImplicitFivb,
            _ => LossKind::LogScore,
        }
    }

    pub fn free(self) -> FreeSet {
        let mut f = FreeSet::default();
        match self {
            Preset::Fivb => {}
            Preset::Thresholds => f.thresholds = true,
            Preset::Hfa => f.eta = true,
            Preset::Both => {
                f.thresholds = true;
                f.eta = true;
            }
            Preset::Scores => {
                f.scores = true;
                f.eta = true;
            }
            Preset::Weights => {
                f.weights = true;
                f.eta = true;
            }
        }
        f
    }

    /// Starting parameters: the fixed parts of the preset on top of `base`.
    pub fn start(self, base: &ModelParams) -> ModelParams {
        let mut p = base.clone();
        match self {
            Preset::Fivb => {
                p.thresholds = Thresholds::fivb();
                p.eta = 0.0;
            }
            Preset::Thresholds => p.eta = 0.0,
            Preset::Hfa | Preset::Weights => p.thresholds = Thresholds::fivb(),
            Preset::Both | Preset::Scores => {}
        }
        if self == Preset::Weights {
            p.weights.iter_mut().for_each(|w| *w = 1.0);
        }
        p
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fivb => "fivb",
            Preset::Thresholds => "thresholds",
            Preset::Hfa => "hfa",
            Preset::Both => "both",
            Preset::Scores => "scores",
            Preset::Weights => "weights",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown case `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescent,
    Bfgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub method: Optimizer,
    pub max_iter: usize,
    /// Stop once the gradient norm (in the optimizer's coordinates) is below.
    pub grad_tol: f64,
    pub fit: FitOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            method: Optimizer::GradientDescent,
            max_iter: 500,
            grad_tol: 1e-6,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub values: Vec<f64>,
    #[serde(rename = "U")]
    pub u: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperOptResult {
    pub kind: LossKind,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub params: ModelParams,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "U_ntr")]
    pub u_ntr: Option<f64>,
    #[serde(rename = "U_hfa")]
    pub u_hfa: Option<f64>,
    /// Always `implicit-gradient`: the gradients are analytic.
    pub gradient: String,
    pub optimizer: Optimizer,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub trace: Vec<TraceEntry>,
}

/// The optimizer works on the packed free parameters with `γ` replaced by
/// `ln γ`, which keeps it positive.
struct Problem<'a> {
    d: &'a Dataset,
    kind: LossKind,
    set: FreeSet,
    base: &'a ModelParams,
    gamma_at: Option<usize>,
    fit: FitOptions,
}

struct Point {
    x: Vec<f64>,
    grad: Vec<f64>,
    hg: HyperGrad,
}

impl Problem<'_> {
    fn to_values(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        if let Some(k) = self.gamma_at {
            v[k] = v[k].exp();
        }
        v
    }

    fn eval(&self, x: &[f64], warm: Option<&[f64]>) -> Result<Point> {
        let values = self.to_values(x);
        let p = self.set.unpack(self.base, &values)?;
        let opts = FitOptions {
            warm_start: warm.map(<[f64]>::to_vec),
            ..self.fit.clone()
        };
        let hg = hyper_grad_with(self.d, &p, self.kind, self.set, &opts)?;
        let mut grad = hg.grad.clone();
        if let Some(k) = self.gamma_at {
            grad[k] *= values[k];
        }
        Ok(Point {
            x: x.to_vec(),
            grad,
            hg,
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finish(
    kind: LossKind,
    set: FreeSet,
    pt: Point,
    optimizer: Optimizer,
    converged: bool,
    iterations: usize,
    trace: Vec<TraceEntry>,
) -> HyperOptResult {
    let r = pt.hg.report;
    HyperOptResult {
        kind,
        names: set.names(&r.params),
        values: pt.hg.values,
        params: r.params,
        u: r.u,
        v: r.v,
        u_ntr: r.u_ntr,
        u_hfa: r.u_hfa,
        gradient: "implicit-gradient".into(),
        optimizer,
        converged,
        iterations,
        grad_norm: norm(&pt.grad),
        trace,
    }
}

/// Minimizes the approximate leave-one-out `U` over the free parameters,
/// starting from `init`. Every accepted step lowers `U`; trial points that
/// break a constraint or make the fit fail are treated as too long a step.
pub fn optimize_hyper(
    d: &Dataset,
    kind: LossKind,
    set: FreeSet,
    init: &ModelParams,
    opts: &OptimizerOptions,
) -> Result<HyperOptResult> {
    init.validate()?;
    let names = set.names(init);
    let gamma_at = set.gamma.then(|| names.len() - 1);
    if set.gamma && init.gamma <= 0.0 {
        return Err(Error::InvalidParams(
            "gamma must start positive when optimized".into(),
        ));
    }
    let prob = Problem {
        d,
        kind,
        set,
        base: init,
        gamma_at,
        fit: opts.fit.clone(),
    };
    let mut x0 = set.pack(init);
    if let Some(k) = gamma_at {
        x0[k] = x0[k].ln();
    }
    let mut cur = prob.eval(&x0, None)?;
    let n = x0.len();
    let mut trace = vec![TraceEntry {
        iteration: 0,
        values: cur.hg.values.clone(),
        u: cur.hg.report.u,
        grad_norm: norm(&cur.grad),
        step: 0.0,
    }];
    let mut inv_h = DMatrix::<f64>::identity(n, n);
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 1..=opts.max_iter {
        let gnorm = norm(&cur.grad);
        if n == 0 || gnorm <= opts.grad_tol {
            return Ok(finish(kind, set, cur, opts.method, true, it - 1, trace));
        }
        let dir: Vec<f64> = match opts.method {
            Optimizer::GradientDescent => cur.grad.iter().map(|g| -g).collect(),
            Optimizer::Bfgs => (-(&inv_h * DVector::from_column_slice(&cur.grad)))
                .as_slice()
                .to_vec(),
        };
        let mut slope = dot(&cur.grad, &dir);
        let dir = if slope < 0.0 {
            dir
        } else {
            // lost descent (BFGS drift): restart from the gradient
            inv_h = DMatrix::identity(n, n);
            slope = -gnorm * gnorm;
            cur.grad.iter().map(|g| -g).collect()
        };
        let dnorm = norm(&dir);
        let mut step = match (&last, opts.method) {
            // Barzilai-Borwein guess from the previous move
            (Some((s, y)), Optimizer::GradientDescent) if dot(s, y) > 0.0 => dot(s, s) / dot(s, y),
            (Some(_), Optimizer::Bfgs) => 1.0,
            _ => (FIRST_STEP / dnorm).min(1.0),
        };
        let u0 = cur.hg.report.u;
        let mut next = None;
        for _ in 0..MAX_HALVINGS {
            let x: Vec<f64> = cur.x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            if let Ok(pt) = prob.eval(&x, Some(&cur.hg.theta)) {
                if pt.hg.report.u <= u0 + ARMIJO * step * slope {
                    next = Some(pt);
                    break;
                }
            }
            step *= SHRINK;
        }
        let Some(next) = next else {
            return Err(Error::LineSearch {
                iterations: it,
                trace,
            });
        };
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if opts.method == Optimizer::Bfgs && sy > 1e-16 {
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            if last.is_none() {
                inv_h *= sy / dot(&y, &y);
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &sv * yv.transpose();
            let right = &i - rho * &yv * sv.transpose();
            inv_h = &left * &inv_h * &right + rho * &sv * sv.transpose();
        }
        last = Some((s, y));
        cur = next;
        trace.push(TraceEntry {
            iteration: it,
            values: cur.hg.values.clone(),
            u: cur.hg.report.u,
            grad_norm: norm(&cur.grad),
            step,
        });
    }
    let converged = norm(&cur.grad) <= opts.grad_tol;
    Ok(finish(
        kind,
        set,
        cur,
        opts.method,
        converged,
        opts.max_iter,
        trace,
    ))
}

/// Runs a preset from `base`. `Both` starts from the better of the
/// thresholds-only and home-advantage-only optima, so its result can only
/// improve on both.
pub fn solve_preset(
    d: &Dataset,
    preset: Preset,
    kind: LossKind,
    base: &ModelParams,
    opts: &OptimizerOptions,
) -> Result<HyperOptResult> {
    if preset != Preset::Both {
        return optimize_hyper(d, kind, preset.free(), &preset.start(base), opts);
    }
    let ii = optimize_hyper(
        d,
        kind,
        Preset::Thresholds.free(),
        &Preset::Thresholds.start(base),
        opts,
    )?;
    let iii = optimize_hyper(d, kind, Preset::Hfa.free(), &Preset::Hfa.start(base), opts)?;
    let from = if ii.u <= iii.u { &ii.params } else { &iii.params };
    optimize_hyper(d, kind, Preset::Both.free(), from, opts)
}

/// The four threshold / home-advantage studies on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResults {
    pub fivb: HyperOptResult,
    pub thresholds: HyperOptResult,
    pub hfa: HyperOptResult,
    pub both: HyperOptResult,
}

pub fn run_cases(
    d: &Dataset,
    kind: LossKind,
    base: &ModelParams,
    opts: &OptimizerOptions,
) -> Result<CaseResults> {
    let run = |pr: Preset| optimize_hyper(d, kind, pr.free(), &pr.start(base), opts);
    let fivb = run(Preset::Fivb)?;
    let thresholds = run(Preset::Thresholds)?;
    let hfa = run(Preset::Hfa)?;
    let from = if thresholds.u <= hfa.u {
        &thresholds.params
    } else {
        &hfa.params
    };
    let both = optimize_hyper(d, kind, Preset::Both.free(), from, opts)?;
    Ok(CaseResults {
        fivb,
        thresholds,
        hfa,
        both,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub result: Option<HyperOptResult>,
    pub error: Option<String>,
}

/// Solves `preset` at every `γ`; a failure is recorded and the sweep goes on.
pub fn gamma_sweep(
    d: &Dataset,
    preset: Preset,
    kind: LossKind,
    base: &ModelParams,
    gammas: &[f64],
    opts: &OptimizerOptions,
) -> Result<Vec<SweepRow>> {
    if gammas.is_empty() {
        return Err(Error::InvalidParams("empty gamma list".into()));
    }
    Ok(gammas
        .par_iter()
        .map(|&gamma| {
            let p = base.clone().with_gamma(gamma);
            match solve_preset(d, preset, kind, &p, opts) {
                Ok(r) => SweepRow {
                    gamma,
                    result: Some(r),
                    error: None,
                },
                Err(e) => SweepRow {
                    gamma,
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// CSV `gamma,U,V,U_ntr,U_hfa,<free params>`; failed rows keep only `gamma`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], names: &[String], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header = vec!["gamma", "U", "V", "U_ntr", "U_hfa"];
    header.extend(names.iter().map(String::as_str));
    out.write_record(&header).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let mut rec = vec![row.gamma.to_string()];
        match &row.result {
            Some(r) => {
                rec.extend([r.u.to_string(), r.v.to_string(), opt(r.u_ntr), opt(r.u_hfa)]);
                rec.extend(r.values.iter().map(f64::to_string));
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 4 + names.len())),
        }
        out.write_record(&rec).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}
