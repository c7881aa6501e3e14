//! The FIVB update written in the federation's own vocabulary.

use serde::{Deserialize, Serialize};

use super::RankState;
use crate::dataset::MatchRecord;
use crate::error::{Error, Result};
use crate::model::{expected_score, outcome_probs, LossKind, FIVB_MU, FIVB_SCALE};

/// One match in FIVB notation. Field names follow the official rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CompatRecord {
    pub t: usize,
    pub WRS1: f64,
    pub WRS2: f64,
    pub Delta: f64,
    pub P1: f64,
    pub P2: f64,
    pub P3: f64,
    pub P4: f64,
    pub P5: f64,
    pub P6: f64,
    pub SSV: f64,
    pub EMR: f64,
    pub MWF: f64,
    pub WR_value: f64,
    pub WR_points: f64,
}

/// Builds the record for `rec` from the pre-match state, and checks that
/// `WR_points` is the change the state's update would apply.
pub fn fivb_notation(rec: &MatchRecord, state: &RankState) -> Result<CompatRecord> {
    let p = &state.params;
    if p.scale != FIVB_SCALE || p.mu != FIVB_MU {
        return Err(Error::Unsupported(format!(
            "FIVB notation needs s = 125 and mu = 0.01 (got s = {}, mu = {})",
            p.scale, p.mu
        )));
    }
    if state.kind != LossKind::ImplicitFivb || p.levels() != 6 {
        return Err(Error::Unsupported(
            "FIVB notation needs the implicit FIVB loss with six outcomes".into(),
        ));
    }
    let wrs1 = state.theta[rec.home];
    let wrs2 = state.theta[rec.away];
    let delta = 8.0 * (wrs1 - wrs2) / 1000.0;
    let arg = delta + rec.venue() * p.eta;
    let probs = outcome_probs(arg, &p.thresholds);
    let ssv = p.scores.get(rec.outcome);
    let emr = expected_score(arg, &p.thresholds, &p.scores);
    let mwf = 10.0 * p.weight(rec.category);
    let wr_value = ssv - emr;
    let wr_points = wr_value * mwf / 8.0;
    let applied = state.delta(rec);
    if (wr_points - applied).abs() > 1e-12 * applied.abs().max(1.0) {
        return Err(Error::Unsupported(format!(
            "WR points {wr_points} differ from the applied update {applied}"
        )));
    }
    Ok(CompatRecord {
        t: rec.t,
        WRS1: wrs1,
        WRS2: wrs2,
        Delta: delta,
        P1: probs[0],
        P2: probs[1],
        P3: probs[2],
        P4: probs[3],
        P5: probs[4],
        P6: probs[5],
        SSV: ssv,
        EMR: emr,
        MWF: mwf,
        WR_value: wr_value,
        WR_points: wr_points,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::dataset::Dataset;
    use crate::model::ModelParams;

    fn state(theta: Vec<f64>) -> RankState {
        RankState::new(theta, ModelParams::fivb(), LossKind::ImplicitFivb)
    }

    fn rec(y: usize, category: usize) -> MatchRecord {
        let mut d = Dataset::empty(6, 7);
        let date = NaiveDate::from_ymd_opt(2022, 6, 1).unwrap();
        d.push(date, "A", "B", y, false, category, None).unwrap();
        d.matches[0].clone()
    }

    #[test]
    fn equal_skills_win() {
        let c = fivb_notation(&rec(0, 0), &state(vec![300.0, 300.0])).unwrap();
        assert_eq!(c.WR_value, 2.0);
        assert_eq!(c.WR_points, 2.5);
        assert_eq!(c.MWF, 10.0);
        let sum: f64 = [c.P1, c.P2, c.P3, c.P4, c.P5, c.P6].iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_and_weight_factor() {
        let c = fivb_notation(&rec(3, 4), &state(vec![425.0, 300.0])).unwrap();
        assert_eq!(c.Delta, 1.0);
        assert_eq!(c.MWF, 40.0);
        assert_eq!(c.SSV, -1.0);
    }

    #[test]
    fn other_scales_rejected() {
        let mut s = state(vec![0.0, 0.0]);
        s.params.scale = 100.0;
        assert!(fivb_notation(&rec(0, 0), &s).is_err());
        let mut s = state(vec![0.0, 0.0]);
        s.kind = LossKind::LogScore;
        assert!(fivb_notation(&rec(0, 0), &s).is_err());
    }
}
