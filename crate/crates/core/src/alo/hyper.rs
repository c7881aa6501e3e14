//! Gradient of the approximate leave-one-out metric with respect to the
//! hyper-parameters, through the implicit dependence `θ̂(p)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{alo_state, AloReport, AloState};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::model::{
    log_loss_d1, score_sensitivity, threshold_sensitivity, LossKind, ModelParams, NumericalScores,
    Sensitivity, Thresholds,
};

/// Hyper-parameter groups left free. Constraints are built into the
/// parameterization: symmetric thresholds expose `c_0 .. c_{n-1}`, scores are
/// antisymmetric with `r_0` fixed, and `ξ_0` stays at its value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeSet {
    pub thresholds: bool,
    pub eta: bool,
    pub scores: bool,
    pub weights: bool,
    pub gamma: bool,
}

impl FreeSet {
    /// Parses a comma list of `c`, `eta`, `r`, `xi`, `gamma`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut f = Self::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "c" => f.thresholds = true,
                "eta" => f.eta = true,
                "r" => f.scores = true,
                "xi" => f.weights = true,
                "gamma" => f.gamma = true,
                other => {
                    return Err(Error::InvalidParams(format!(
                        "unknown hyper-parameter group `{other}` (expected c, eta, r, xi, gamma)"
                    )))
                }
            }
        }
        Ok(f)
    }

    pub fn is_empty(&self) -> bool {
        !(self.thresholds || self.eta || self.scores || self.weights || self.gamma)
    }

    fn threshold_count(p: &ModelParams) -> usize {
        if p.symmetric {
            Thresholds::symmetric_free_count(p.levels())
        } else {
            p.levels() - 1
        }
    }

    pub fn names(&self, p: &ModelParams) -> Vec<String> {
        let mut out = Vec::new();
        if self.thresholds {
            out.extend((0..Self::threshold_count(p)).map(|k| format!("c{k}")));
        }
        if self.eta {
            out.push("eta".into());
        }
        if self.scores {
            let n = NumericalScores::antisymmetric_free_count(p.levels());
            out.extend((1..=n).map(|k| format!("r{k}")));
        }
        if self.weights {
            out.extend((1..p.categories()).map(|v| format!("xi{v}")));
        }
        if self.gamma {
            out.push("gamma".into());
        }
        out
    }

    pub fn pack(&self, p: &ModelParams) -> Vec<f64> {
        let mut out = Vec::new();
        if self.thresholds {
            out.extend(&p.thresholds.interior()[..Self::threshold_count(p)]);
        }
        if self.eta {
            out.push(p.eta);
        }
        if self.scores {
            let n = NumericalScores::antisymmetric_free_count(p.levels());
            out.extend(&p.scores.values()[1..=n]);
        }
        if self.weights {
            out.extend(&p.weights[1..]);
        }
        if self.gamma {
            out.push(p.gamma);
        }
        out
    }

    /// Inverse of [`pack`](Self::pack) on top of `base`; rejects values that
    /// break a constraint.
    pub fn unpack(&self, base: &ModelParams, v: &[f64]) -> Result<ModelParams> {
        let mut p = base.clone();
        let levels = p.levels();
        let mut rest = v;
        let mut take = |n: usize| -> Result<&[f64]> {
            if rest.len() < n {
                return Err(Error::LengthMismatch(v.len(), self.names(base).len()));
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        if self.thresholds {
            let free = take(Self::threshold_count(base))?;
            p.thresholds = if base.symmetric {
                Thresholds::symmetric(levels, free)?
            } else {
                Thresholds::new(free.to_vec())?
            };
        }
        if self.eta {
            p.eta = take(1)?[0];
        }
        if self.scores {
            let free = take(NumericalScores::antisymmetric_free_count(levels))?;
            p.scores = NumericalScores::antisymmetric(levels, base.scores.get(0), free)?;
        }
        if self.weights {
            let free = take(base.categories() - 1)?;
            p.weights[1..].copy_from_slice(free);
        }
        if self.gamma {
            p.gamma = take(1)?[0];
        }
        if !rest.is_empty() {
            return Err(Error::LengthMismatch(v.len(), self.names(base).len()));
        }
        p.validate()?;
        Ok(p)
    }

    /// Raw coordinates behind each free parameter, with chain-rule weights.
    fn raw_map(&self, p: &ModelParams) -> Vec<Vec<(Raw, f64)>> {
        let levels = p.levels();
        let mut out = Vec::new();
        if self.thresholds {
            for l in 0..Self::threshold_count(p) {
                if p.symmetric {
                    out.push(vec![(Raw::C(l), 1.0), (Raw::C(levels - 2 - l), -1.0)]);
                } else {
                    out.push(vec![(Raw::C(l), 1.0)]);
                }
            }
        }
        if self.eta {
            out.push(vec![(Raw::Eta, 1.0)]);
        }
        if self.scores {
            for k in 1..=NumericalScores::antisymmetric_free_count(levels) {
                out.push(vec![(Raw::R(k), 1.0), (Raw::R(levels - 1 - k), -1.0)]);
            }
        }
        if self.weights {
            out.extend((1..p.categories()).map(|v| vec![(Raw::Xi(v), 1.0)]));
        }
        if self.gamma {
            out.push(vec![(Raw::Gamma, 1.0)]);
        }
        out
    }
}

/// One unconstrained hyper-parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Raw {
    C(usize),
    Eta,
    R(usize),
    Xi(usize),
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrad {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// `dU/dq` for each free parameter, in `names` order.
    pub grad: Vec<f64>,
    pub report: AloReport,
    /// Skills of the underlying fit.
    #[serde(skip)]
    pub theta: Vec<f64>,
}

pub fn hyper_grad(d: &Dataset, p: &ModelParams, kind: LossKind, set: FreeSet) -> Result<HyperGrad> {
    hyper_grad_with(d, p, kind, set, &FitOptions::default())
}

pub(crate) fn hyper_grad_with(
    d: &Dataset,
    p: &ModelParams,
    kind: LossKind,
    set: FreeSet,
    opts: &FitOptions,
) -> Result<HyperGrad> {
    let st = alo_state(d, p, kind, opts)?;
    let ctx = Context::new(d, p, kind, &st, set);
    let grad = set
        .raw_map(p)
        .iter()
        .map(|terms| terms.iter().map(|&(q, w)| w * ctx.d_u(q)).sum())
        .collect();
    Ok(HyperGrad {
        names: set.names(p),
        values: set.pack(p),
        grad,
        report: st.report,
        theta: st.fit.theta,
    })
}

/// Per-match quantities shared by every coordinate.
struct Context<'a> {
    d: &'a Dataset,
    st: &'a AloState,
    xi: Vec<f64>,
    /// Training-loss sensitivities to `c` and `r` at `w_t`.
    thr: Vec<Vec<Sensitivity>>,
    scr: Vec<Vec<Sensitivity>>,
    /// Log-score sensitivities to `c` at the held-out argument.
    val_thr: Vec<Vec<Sensitivity>>,
    /// `ℓ̇^val` at the held-out argument.
    val_d1: Vec<f64>,
}

impl<'a> Context<'a> {
    fn new(d: &'a Dataset, p: &'a ModelParams, kind: LossKind, st: &'a AloState, set: FreeSet) -> Self {
        let w = |i: usize| st.fit.z(&d.matches[i]) + d.matches[i].venue() * p.eta;
        let held = |i: usize| st.report.z_loo[i] + d.matches[i].venue() * p.eta;
        let t = d.len();
        let per = |f: &dyn Fn(usize) -> Vec<Sensitivity>, on: bool| {
            if on {
                (0..t).map(f).collect()
            } else {
                Vec::new()
            }
        };
        let y = |i: usize| d.matches[i].outcome;
        Self {
            d,
            st,
            xi: d.matches.iter().map(|m| p.weight(m.category)).collect(),
            thr: per(&|i| threshold_sensitivity(kind, y(i), w(i), p), set.thresholds),
            scr: per(&|i| score_sensitivity(kind, y(i), w(i), p), set.scores),
            val_thr: per(
                &|i| threshold_sensitivity(LossKind::LogScore, y(i), held(i), p),
                set.thresholds,
            ),
            val_d1: (0..t)
                .map(|i| log_loss_d1(y(i), held(i), &p.thresholds))
                .collect(),
        }
    }

    fn d_u(&self, q: Raw) -> f64 {
        let (d, st) = (self.d, self.st);
        let m = d.team_count();
        let t = d.len();
        let is_eta = q == Raw::Eta;

        // partials of ξℓ̇ and ξℓ̈ at fixed argument, and of ℓ^val at fixed z
        let mut p1 = vec![0.0; t];
        let mut p2 = vec![0.0; t];
        let mut pv = vec![0.0; t];
        for (i, rec) in d.matches.iter().enumerate() {
            let l = &st.derivs[i];
            match q {
                Raw::C(k) => {
                    p1[i] = self.xi[i] * self.thr[i][k].d1;
                    p2[i] = self.xi[i] * self.thr[i][k].d2;
                    pv[i] = self.val_thr[i][k].value;
                }
                Raw::R(k) => {
                    p1[i] = self.xi[i] * self.scr[i][k].d1;
                    p2[i] = self.xi[i] * self.scr[i][k].d2;
                }
                Raw::Xi(v) if rec.category == v => {
                    p1[i] = l.d1;
                    p2[i] = l.d2;
                }
                _ => {}
            }
        }

        // dθ̂ = -Ĥ⁻¹ ∂_q ∇J
        let mut gq = DVector::zeros(m);
        for (i, rec) in d.matches.iter().enumerate() {
            let mut c = p1[i];
            if is_eta {
                c += self.xi[i] * st.derivs[i].d2 * rec.venue();
            }
            gq[rec.home] += c;
            gq[rec.away] -= c;
        }
        if q == Raw::Gamma {
            gq += DVector::from_column_slice(&st.fit.theta);
        }
        let dtheta = -(&st.g * gq);

        let mut dz = vec![0.0; t];
        let mut d2 = vec![0.0; t];
        let mut dh = DMatrix::zeros(m, m);
        for (i, rec) in d.matches.iter().enumerate() {
            dz[i] = dtheta[rec.home] - dtheta[rec.away];
            let dw = dz[i] + if is_eta { rec.venue() } else { 0.0 };
            d2[i] = p2[i] + self.xi[i] * st.derivs[i].d3 * dw;
            let c = d2[i];
            dh[(rec.home, rec.home)] += c;
            dh[(rec.away, rec.away)] += c;
            dh[(rec.home, rec.away)] -= c;
            dh[(rec.away, rec.home)] -= c;
        }
        if q == Raw::Gamma {
            for k in 0..m {
                dh[(k, k)] += 1.0;
            }
        }
        let b = &st.g * dh * &st.g;

        let mut total = 0.0;
        for (i, rec) in d.matches.iter().enumerate() {
            let (h, a_) = (rec.home, rec.away);
            let da = -(b[(h, h)] + b[(a_, a_)] - b[(h, a_)] - b[(a_, h)]);
            let l = &st.derivs[i];
            let a = st.a[i];
            let dw = dz[i] + if is_eta { rec.venue() } else { 0.0 };
            let d1 = p1[i] + self.xi[i] * l.d2 * dw;
            let (a1, a2) = (self.xi[i] * l.d1, self.xi[i] * l.d2);
            let den = 1.0 - a2 * a;
            let num = a1 * a;
            let dzl = dz[i] + (d1 * a + a1 * da) / den + num * (d2[i] * a + a2 * da) / (den * den);
            let shift = if is_eta { rec.venue() } else { 0.0 };
            total += self.val_d1[i] * (dzl + shift) + pv[i];
        }
        total / t as f64
    }
}
