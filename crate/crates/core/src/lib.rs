//! Ordinal probit rating laboratory for six-level volleyball outcomes.
//!
//! * [`model`]: the cumulative-link probit model, the log-score and the
//!   implicit FIVB loss with their derivatives, analytic score matching.
//! * [`dataset`]: match records, CSV ingestion and filtering, synthetic data.
//! * [`fit`]: regularized batch estimation of skills by Newton's method.
//! * [`alo`]: exact and approximate leave-one-out validation, hyper-gradients
//!   and hyper-parameter search.
//! * [`online`]: stochastic-gradient ranking, including the FIVB update.

pub mod alo;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod model;
pub mod normal;
pub mod online;

pub use error::{Error, Result};
pub use model::{LossKind, ModelParams, NumericalScores, Thresholds};
