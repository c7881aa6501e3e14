//! Leave-one-out validation of the batch fit.
//!
//! [`exact_loo`] refits without each match in turn; [`alo`] replaces the
//! refits by a one-step expansion around the full fit. Both score the
//! held-out prediction with the log-score, whatever loss trained the skills.

mod hyper;
mod optimize;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hyper::{hyper_grad, FreeSet, HyperGrad};
pub use optimize::{
    gamma_sweep, optimize_hyper, run_cases, solve_preset, write_sweep_csv, CaseResults, HyperOptResult,
    Optimizer, OptimizerOptions, Preset, SweepRow, TraceEntry,
};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit, FitOptions, FitResult};
use crate::model::{log_loss, loss_derivs, LossDerivs, LossKind, ModelParams};

/// `V = e^{-U}`, the geometric mean of the predicted probabilities.
pub fn v_from_u(u: f64) -> f64 {
    (-u).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LooMethod {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AloReport {
    pub method: LooMethod,
    pub kind: LossKind,
    /// Held-out predictions `ẑ_{t,\t}`, without the home shift.
    pub z_loo: Vec<f64>,
    /// Leverages `x_tᵀ Ĥ⁻¹ x_t` of the full fit.
    pub a: Vec<f64>,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    /// `None` when there is no match of that venue type.
    #[serde(rename = "U_ntr")]
    pub u_ntr: Option<f64>,
    #[serde(rename = "U_hfa")]
    pub u_hfa: Option<f64>,
    #[serde(rename = "T_ntr")]
    pub t_ntr: usize,
    #[serde(rename = "T_hfa")]
    pub t_hfa: usize,
    pub params: ModelParams,
}

/// Validation metrics from held-out predictions.
fn report(
    d: &Dataset,
    p: &ModelParams,
    kind: LossKind,
    method: LooMethod,
    z_loo: Vec<f64>,
    a: Vec<f64>,
) -> AloReport {
    let (mut s_ntr, mut s_hfa) = (0.0, 0.0);
    let (mut t_ntr, mut t_hfa) = (0, 0);
    for (rec, &z) in d.matches.iter().zip(&z_loo) {
        let l = log_loss(rec.outcome, z + rec.venue() * p.eta, &p.thresholds);
        if rec.home_venue {
            s_hfa += l;
            t_hfa += 1;
        } else {
            s_ntr += l;
            t_ntr += 1;
        }
    }
    let u = (s_ntr + s_hfa) / d.len() as f64;
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    AloReport {
        method,
        kind,
        z_loo,
        a,
        u,
        v: v_from_u(u),
        u_ntr: mean(s_ntr, t_ntr),
        u_hfa: mean(s_hfa, t_hfa),
        t_ntr,
        t_hfa,
        params: p.clone(),
    }
}

/// `(Ĥ⁻¹)` for leverages. Without a penalty the Hessian is blind to a common
/// shift of all skills; adding `11ᵀ/M` fixes that direction and leaves
/// `x_tᵀ Ĥ⁻¹ x_t` unchanged for every difference vector `x_t`.
pub(crate) fn inverse_hessian(f: &FitResult, gamma: f64) -> Result<DMatrix<f64>> {
    let mut h = f.hessian.clone();
    if gamma == 0.0 {
        let m = h.nrows();
        h.add_scalar_mut(1.0 / m as f64);
    }
    Cholesky::<f64, Dyn>::new(h)
        .map(|c| c.inverse())
        .ok_or(Error::SingularHessian)
}

fn leverage(g: &DMatrix<f64>, home: usize, away: usize) -> f64 {
    g[(home, home)] + g[(away, away)] - g[(home, away)] - g[(away, home)]
}

/// Quantities of the approximation kept for the hyper-gradient.
pub(crate) struct AloState {
    pub fit: FitResult,
    pub g: DMatrix<f64>,
    /// Training-loss derivatives at `w_t = ẑ_t + h_t η`.
    pub derivs: Vec<LossDerivs>,
    pub a: Vec<f64>,
    pub report: AloReport,
}

pub(crate) fn alo_state(d: &Dataset, p: &ModelParams, kind: LossKind, opts: &FitOptions) -> Result<AloState> {
    if d.is_empty() {
        return Err(Error::InvalidParams("no matches to validate".into()));
    }
    let f = fit(d, p, kind, opts)?;
    let g = inverse_hessian(&f, p.gamma)?;
    let mut z_loo = Vec::with_capacity(d.len());
    let mut a = Vec::with_capacity(d.len());
    let mut derivs = Vec::with_capacity(d.len());
    for rec in &d.matches {
        let z = f.z(rec);
        let xi = p.weight(rec.category);
        let l = loss_derivs(kind, rec.outcome, z + rec.venue() * p.eta, p);
        let at = leverage(&g, rec.home, rec.away);
        let denom = 1.0 - xi * l.d2 * at;
        if denom <= 0.0 {
            return Err(Error::LeverageTooHigh {
                t: rec.t,
                denominator: denom,
            });
        }
        z_loo.push(z + xi * l.d1 * at / denom);
        a.push(at);
        derivs.push(l);
    }
    let report = report(d, p, kind, LooMethod::Approximate, z_loo, a.clone());
    Ok(AloState {
        fit: f,
        g,
        derivs,
        a,
        report,
    })
}

/// Approximate leave-one-out from a single fit.
pub fn alo(d: &Dataset, p: &ModelParams, kind: LossKind) -> Result<AloReport> {
    alo_with(d, p, kind, &FitOptions::default())
}

pub fn alo_with(d: &Dataset, p: &ModelParams, kind: LossKind, opts: &FitOptions) -> Result<AloReport> {
    Ok(alo_state(d, p, kind, opts)?.report)
}

/// Brute-force leave-one-out: `T` refits, run in parallel.
pub fn exact_loo(d: &Dataset, p: &ModelParams, kind: LossKind) -> Result<AloReport> {
    if d.len() < 2 {
        return Err(Error::InvalidParams(
            "exact leave-one-out needs at least two matches".into(),
        ));
    }
    let full = fit(d, p, kind, &FitOptions::default())?;
    let g = inverse_hessian(&full, p.gamma).ok();
    let z_loo = (0..d.len())
        .into_par_iter()
        .map(|i| {
            let opts = FitOptions {
                exclude: Some(i),
                warm_start: Some(full.theta.clone()),
                ..Default::default()
            };
            let rec = &d.matches[i];
            fit(d, p, kind, &opts)
                .map(|f| f.z(rec))
                .map_err(|e| Error::HeldOut {
                    t: rec.t,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let a = match g {
        Some(g) => d.matches.iter().map(|r| leverage(&g, r.home, r.away)).collect(),
        None => Vec::new(),
    };
    Ok(report(d, p, kind, LooMethod::Exact, z_loo, a))
}
