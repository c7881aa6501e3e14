use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::thresholds::{NumericalScores, Thresholds};
use crate::error::{Error, Result};

/// Match weights `ξ_v` of the FIVB ranking, indexed by category.
pub const FIVB_WEIGHTS: [f64; 7] = [1.0, 1.75, 2.0, 3.5, 4.0, 4.5, 5.0];

/// FIVB display scale, `1000 / 8`.
pub const FIVB_SCALE: f64 = 125.0;

/// FIVB adaptation step.
pub const FIVB_MU: f64 = 0.01;

/// Every hyper-parameter of the model and of the online algorithm.
///
/// The JSON form uses exactly the field names below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub thresholds: Thresholds,
    /// Home advantage added to `z` on home-venue matches.
    pub eta: f64,
    /// Used only by the implicit FIVB loss.
    pub scores: NumericalScores,
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub scale: f64,
    pub mu: f64,
    pub symmetric: bool,
}

impl ModelParams {
    /// The official FIVB configuration: `c^FIVB`, `r^FIVB`, Table-1 weights,
    /// `η = 0`, `s = 125`, `μ = 0.01`.
    pub fn fivb() -> Self {
        Self {
            thresholds: Thresholds::fivb(),
            eta: 0.0,
            scores: NumericalScores::fivb(),
            weights: FIVB_WEIGHTS.to_vec(),
            gamma: 0.5,
            scale: FIVB_SCALE,
            mu: FIVB_MU,
            symmetric: true,
        }
    }

    pub fn levels(&self) -> usize {
        self.thresholds.levels()
    }

    pub fn categories(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, category: usize) -> f64 {
        self.weights[category]
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_unit_weights(mut self) -> Self {
        self.weights.iter_mut().for_each(|w| *w = 1.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        if self.scores.levels() != levels {
            return Err(Error::InvalidParams(format!(
                "{} scores for {levels} outcome levels",
                self.scores.levels()
            )));
        }
        if self.weights.is_empty() {
            return Err(Error::InvalidParams("no category weights".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParams("weights must be non-negative".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma = {}", self.gamma)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParams(format!("scale = {}", self.scale)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParams(format!("mu = {}", self.mu)));
        }
        if !self.eta.is_finite() {
            return Err(Error::InvalidParams(format!("eta = {}", self.eta)));
        }
        if self.symmetric {
            if !self.thresholds.is_symmetric(1e-12) {
                return Err(Error::InvalidParams(
                    "symmetric flag set but thresholds are not symmetric".into(),
                ));
            }
            if !self.scores.is_antisymmetric(1e-12) {
                return Err(Error::InvalidParams(
                    "symmetric flag set but scores are not antisymmetric".into(),
                ));
            }
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::fivb()
    }
}

/// Per-match loss driving estimation.
///
/// `ImplicitFivb` reads its numerical scores from [`ModelParams::scores`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LogScore,
    ImplicitFivb,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::LogScore => "log",
            LossKind::ImplicitFivb => "fivb",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" | "log_score" | "logscore" => Ok(LossKind::LogScore),
            "fivb" | "implicit_fivb" | "implicit" => Ok(LossKind::ImplicitFivb),
            other => Err(Error::Unsupported(format!("unknown loss `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_field_names() {
        let p = ModelParams::fivb();
        let v = serde_json::to_value(&p).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "eta",
                "gamma",
                "mu",
                "scale",
                "scores",
                "symmetric",
                "thresholds",
                "weights"
            ]
        );
        let back: ModelParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn validation() {
        assert!(ModelParams::fivb().validate().is_ok());
        let mut p = ModelParams::fivb();
        p.gamma = -1.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::fivb();
        p.scale = 0.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::fivb();
        p.weights[2] = -0.5;
        assert!(p.validate().is_err());
        let mut p = ModelParams::fivb();
        p.scores = NumericalScores::new(vec![2.0, 1.0, 0.5, -1.0, -1.5, -2.0]).unwrap();
        assert!(p.validate().is_err());
        p.symmetric = false;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn loss_kind_parse() {
        assert_eq!("log".parse::<LossKind>().unwrap(), LossKind::LogScore);
        assert_eq!("fivb".parse::<LossKind>().unwrap(), LossKind::ImplicitFivb);
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
