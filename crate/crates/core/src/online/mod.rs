//! Online stochastic-gradient ranking.
//!
//! Skills live on the display scale `s`; after each match the two teams move
//! by `∓ μ s ξ ℓ̇(z/s + h η)` where `z` is their display-scale difference.
//! With the implicit FIVB loss this is exactly the official FIVB update.

mod compat;
mod spearman;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compat::{fivb_notation, CompatRecord};
pub use spearman::{average_ranks, spearman};

use crate::dataset::{Dataset, MatchRecord};
use crate::error::{Error, Result};
use crate::model::{log_loss, loss_derivs, LossKind, ModelParams};

/// Skills and the algorithm configuration between matches.
#[derive(Debug, Clone, PartialEq)]
pub struct RankState {
    /// Display-scale skills aligned with the dataset's team list.
    pub theta: Vec<f64>,
    /// 1-based index of the next match.
    pub t: usize,
    pub params: ModelParams,
    pub kind: LossKind,
    /// Skills before each processed match, when recording.
    pub history: Option<Vec<Vec<f64>>>,
}

/// One processed match as written to the trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub home: String,
    pub away: String,
    pub y: usize,
    pub h: u8,
    pub v: usize,
    /// Display-scale skill difference before the match.
    pub z: f64,
    /// Log-score of the pre-match prediction.
    pub pred_loss: f64,
    pub delta_home: f64,
}

impl RankState {
    pub fn new(theta: Vec<f64>, params: ModelParams, kind: LossKind) -> Self {
        Self {
            theta,
            t: 1,
            params,
            kind,
            history: None,
        }
    }

    pub fn recording(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    /// Model argument `z/s + h η` for a match under the current skills.
    pub fn argument(&self, rec: &MatchRecord) -> f64 {
        rec.schedule().dot(&self.theta) / self.params.scale + rec.venue() * self.params.eta
    }

    /// Change applied to the home team; the away team receives its negative.
    pub fn delta(&self, rec: &MatchRecord) -> f64 {
        let p = &self.params;
        let d1 = loss_derivs(self.kind, rec.outcome, self.argument(rec), p).d1;
        -p.mu * p.scale * p.weight(rec.category) * d1
    }

    /// Scores the match with the pre-match skills, then updates them.
    pub fn step(&mut self, rec: &MatchRecord) -> (f64, f64) {
        let pred_loss = log_loss(rec.outcome, self.argument(rec), &self.params.thresholds);
        let delta = self.delta(rec);
        if let Some(h) = self.history.as_mut() {
            h.push(self.theta.clone());
        }
        self.theta[rec.home] += delta;
        self.theta[rec.away] -= delta;
        self.t += 1;
        (pred_loss, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub team: String,
    pub skill: f64,
}

/// Averaged one-step-ahead metrics of an online run. Metrics over an empty
/// set of matches are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    #[serde(rename = "U_bar")]
    pub u_bar: Option<f64>,
    #[serde(rename = "U_bar_ntr")]
    pub u_bar_ntr: Option<f64>,
    #[serde(rename = "U_bar_hfa")]
    pub u_bar_hfa: Option<f64>,
    pub rho_bar: Option<f64>,
    #[serde(rename = "T")]
    pub matches: usize,
    #[serde(rename = "T_ntr")]
    pub t_ntr: usize,
    #[serde(rename = "T_hfa")]
    pub t_hfa: usize,
    pub mu: f64,
    pub kind: LossKind,
    /// Teams by decreasing final skill.
    pub final_ranking: Vec<RankEntry>,
}

pub struct OnlineRun {
    pub report: OnlineReport,
    pub trace: Vec<StepRecord>,
    pub state: RankState,
}

/// Runs the ranking over `d` in order. `reference`, when given, holds one
/// skill vector per match (the reference skills before that match) and
/// yields the average Spearman correlation with the pre-match skills.
pub fn run(
    d: &Dataset,
    init: &[f64],
    p: &ModelParams,
    kind: LossKind,
    reference: Option<&[Vec<f64>]>,
) -> Result<OnlineRun> {
    p.validate()?;
    let m = d.team_count();
    if init.len() != m {
        return Err(Error::LengthMismatch(init.len(), m));
    }
    if let Some(r) = reference {
        if r.len() != d.len() {
            return Err(Error::LengthMismatch(r.len(), d.len()));
        }
        if let Some(bad) = r.iter().find(|v| v.len() != m) {
            return Err(Error::LengthMismatch(bad.len(), m));
        }
    }
    let mut state = RankState::new(init.to_vec(), p.clone(), kind);
    let (mut sum_ntr, mut sum_hfa) = (0.0, 0.0);
    let (mut t_ntr, mut t_hfa) = (0usize, 0usize);
    let mut rho_sum = 0.0;
    let mut trace = Vec::with_capacity(d.len());
    for (i, rec) in d.matches.iter().enumerate() {
        if let Some(r) = reference {
            rho_sum += spearman(&r[i], &state.theta)?;
        }
        let z = rec.schedule().dot(&state.theta);
        let (loss, delta) = state.step(rec);
        if rec.home_venue {
            sum_hfa += loss;
            t_hfa += 1;
        } else {
            sum_ntr += loss;
            t_ntr += 1;
        }
        trace.push(StepRecord {
            t: rec.t,
            home: d.teams[rec.home].clone(),
            away: d.teams[rec.away].clone(),
            y: rec.outcome,
            h: rec.home_venue as u8,
            v: rec.category,
            z,
            pred_loss: loss,
            delta_home: delta,
        });
    }
    let total = t_ntr + t_hfa;
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    let mut final_ranking: Vec<RankEntry> = d
        .teams
        .iter()
        .zip(&state.theta)
        .map(|(team, &skill)| RankEntry {
            team: team.clone(),
            skill,
        })
        .collect();
    final_ranking.sort_by(|a, b| b.skill.total_cmp(&a.skill));
    let report = OnlineReport {
        u_bar: mean(sum_ntr + sum_hfa, total),
        u_bar_ntr: mean(sum_ntr, t_ntr),
        u_bar_hfa: mean(sum_hfa, t_hfa),
        rho_bar: reference.and_then(|_| mean(rho_sum, total)),
        matches: total,
        t_ntr,
        t_hfa,
        mu: p.mu,
        kind,
        final_ranking,
    };
    Ok(OnlineRun { report, trace, state })
}

/// Writes the per-step trace CSV.
pub fn write_trace<W: Write>(trace: &[StepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in trace {
        out.serialize(row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSearchRow {
    pub mu: f64,
    #[serde(rename = "U_bar")]
    pub u_bar: Option<f64>,
    #[serde(rename = "U_bar_ntr")]
    pub u_bar_ntr: Option<f64>,
    #[serde(rename = "U_bar_hfa")]
    pub u_bar_hfa: Option<f64>,
    pub rho_bar: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSearch {
    pub best_mu: f64,
    #[serde(rename = "best_U_bar")]
    pub best_u_bar: f64,
    /// The best step is the smallest or largest one tried.
    pub on_boundary: bool,
    pub rows: Vec<StepSearchRow>,
}

/// Runs one trajectory per step size and picks the one with the smallest `Ū`.
pub fn step_search(
    d: &Dataset,
    init: &[f64],
    p: &ModelParams,
    kind: LossKind,
    mus: &[f64],
    reference: Option<&[Vec<f64>]>,
) -> Result<StepSearch> {
    if mus.is_empty() {
        return Err(Error::InvalidParams("empty step-size list".into()));
    }
    let rows: Vec<StepSearchRow> = mus
        .par_iter()
        .map(|&mu| {
            let mut q = p.clone();
            q.mu = mu;
            match run(d, init, &q, kind, reference) {
                Ok(r) => StepSearchRow {
                    mu,
                    u_bar: r.report.u_bar,
                    u_bar_ntr: r.report.u_bar_ntr,
                    u_bar_hfa: r.report.u_bar_hfa,
                    rho_bar: r.report.rho_bar,
                    error: None,
                },
                Err(e) => StepSearchRow {
                    mu,
                    u_bar: None,
                    u_bar_ntr: None,
                    u_bar_hfa: None,
                    rho_bar: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = rows
        .iter()
        .filter_map(|r| r.u_bar.filter(|u| u.is_finite()).map(|u| (r.mu, u)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((best_mu, best_u_bar)) = best else {
        return Err(Error::InvalidParams(
            "no step size produced a finite metric".into(),
        ));
    };
    let lo = mus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StepSearch {
        best_mu,
        best_u_bar,
        on_boundary: mus.len() > 1 && (best_mu == lo || best_mu == hi),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dataset::{synthesize, SynthOptions};
    use crate::model::expected_score;

    fn one(y: usize, category: usize) -> (Dataset, MatchRecord) {
        let mut d = Dataset::empty(6, 7);
        d.push(
            NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            "A",
            "B",
            y,
            false,
            category,
            None,
        )
        .unwrap();
        d.intern_team("C");
        let rec = d.matches[0].clone();
        (d, rec)
    }

    #[test]
    fn fivb_equal_skills_win() {
        let (_, rec) = one(0, 0);
        let mut s = RankState::new(
            vec![500.0, 500.0, 321.0],
            ModelParams::fivb(),
            LossKind::ImplicitFivb,
        );
        let (_, delta) = s.step(&rec);
        assert_eq!(delta, 2.5);
        assert_eq!(s.theta, vec![502.5, 497.5, 321.0]);
        assert_eq!(s.t, 2);

        let (_, rec) = one(5, 0);
        let mut s = RankState::new(
            vec![500.0, 500.0, 321.0],
            ModelParams::fivb(),
            LossKind::ImplicitFivb,
        );
        s.step(&rec);
        assert_eq!(s.theta, vec![497.5, 502.5, 321.0]);
    }

    #[test]
    fn closed_form_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let p = ModelParams::fivb();
        for _ in 0..2000 {
            let (_, mut rec) = one(rng.gen_range(0..6), rng.gen_range(0..7));
            rec.home_venue = false;
            let theta = vec![rng.gen_range(0.0..400.0), rng.gen_range(0.0..400.0), 0.0];
            let s = RankState::new(theta.clone(), p.clone(), LossKind::ImplicitFivb);
            let z = (theta[0] - theta[1]) / p.scale;
            let closed = p.mu
                * p.scale
                * p.weight(rec.category)
                * (p.scores.get(rec.outcome) - expected_score(z, &p.thresholds, &p.scores));
            assert!((s.delta(&rec) - closed).abs() <= 1e-12);
        }
    }

    #[test]
    fn spearman_tracking_and_empty_run() {
        let d = Dataset::empty(6, 7);
        let r = run(&d, &[], &ModelParams::fivb(), LossKind::LogScore, None).unwrap();
        assert_eq!(r.report.u_bar, None);
        assert!(r.trace.is_empty());

        let (d, _) = one(1, 2);
        let init = [10.0, 5.0, 1.0];
        let refs = vec![vec![3.0, 2.0, 1.0]];
        let r = run(&d, &init, &ModelParams::fivb(), LossKind::LogScore, Some(&refs)).unwrap();
        assert_eq!(r.report.rho_bar, Some(1.0));
        assert_eq!(r.report.final_ranking[0].team, "A");
    }

    #[test]
    fn metric_split_adds_up() {
        let p = ModelParams::fivb().with_eta(0.2);
        let (d, _) = synthesize(8, 400, &p, 3, None, &SynthOptions::default()).unwrap();
        let init = vec![0.0; 8];
        let r = run(&d, &init, &p, LossKind::ImplicitFivb, None).unwrap().report;
        let (u, un, uh) = (r.u_bar.unwrap(), r.u_bar_ntr.unwrap(), r.u_bar_hfa.unwrap());
        let lhs = r.matches as f64 * u;
        let rhs = r.t_ntr as f64 * un + r.t_hfa as f64 * uh;
        assert!((lhs - rhs).abs() <= 1e-10 * lhs);
    }

    #[test]
    fn scale_commutes() {
        let p = ModelParams::fivb().with_eta(0.1);
        let (d, _) = synthesize(6, 300, &p, 8, None, &SynthOptions::default()).unwrap();
        let base: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let mut unit = p.clone();
        unit.scale = 1.0;
        let a = run(&d, &base, &unit, LossKind::LogScore, None)
            .unwrap()
            .state
            .theta;
        let scaled: Vec<f64> = base.iter().map(|v| v * 125.0).collect();
        let b = run(&d, &scaled, &p, LossKind::LogScore, None)
            .unwrap()
            .state
            .theta;
        for (x, y) in a.iter().zip(&b) {
            assert!((125.0 * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn step_search_picks_minimum() {
        let p = ModelParams::fivb();
        let (d, _) = synthesize(6, 300, &p, 5, None, &SynthOptions::default()).unwrap();
        let init = vec![0.0; 6];
        let s = step_search(&d, &init, &p, LossKind::LogScore, &[0.05], None).unwrap();
        assert_eq!(s.best_mu, 0.05);
        assert!(!s.on_boundary);
        let s = step_search(&d, &init, &p, LossKind::LogScore, &[0.001, 0.05, 0.1, 5.0], None).unwrap();
        let min = s
            .rows
            .iter()
            .filter_map(|r| r.u_bar)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(s.best_u_bar, min);
        assert!(step_search(&d, &init, &p, LossKind::LogScore, &[], None).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let (d, _) = one(2, 1);
        let r = run(&d, &[0.0; 3], &ModelParams::fivb(), LossKind::ImplicitFivb, None).unwrap();
        let mut buf = Vec::new();
        write_trace(&r.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,home,away,y,h,v,z,pred_loss,delta_home\n1,A,B,2,0,1,"));
    }
}
