//! The cumulative-link probit model of ordinal match outcomes.

mod loss;
mod matching;
mod params;
mod thresholds;

pub use loss::{
    expected_score, expected_score_d1, implicit_loss, implicit_loss_d1, implicit_loss_d2, implicit_loss_d3,
    log_loss, log_loss_d1, log_loss_d2, log_loss_d3, loss_derivs, outcome_probs, psi, score_sensitivity,
    threshold_sensitivity, LossDerivs, Sensitivity,
};
pub use matching::{check_convexity, matched_scores, ConvexityReport, ZGrid};
pub use params::{LossKind, ModelParams, FIVB_MU, FIVB_SCALE, FIVB_WEIGHTS};
pub use thresholds::{NumericalScores, Thresholds, VOLLEYBALL_LEVELS};
