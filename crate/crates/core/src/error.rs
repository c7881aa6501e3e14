use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("invalid numerical scores: {0}")]
    InvalidScores(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("outcome index {y} out of range for {levels} outcome levels")]
    OutcomeOutOfRange { y: usize, levels: usize },

    #[error("asymmetric thresholds: score matching requires symmetric cut points")]
    AsymmetricThresholds,

    #[error("{path}: line {line}: {msg}")]
    Csv { path: PathBuf, line: u64, msg: String },

    #[error("illegal set score {home}-{away}")]
    IllegalSetScore { home: u32, away: u32 },

    #[error("unknown category label `{0}`")]
    UnknownCategory(String),

    #[error("unknown team `{0}`")]
    UnknownTeam(String),

    #[error("filter rule `{0}` needs the increment_home column")]
    MissingIncrementColumn(&'static str),

    #[error("fit did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        theta: Vec<f64>,
    },

    #[error("skill of `{team}` diverges (unbeaten or winless within its group); use gamma > 0")]
    Diverged { team: String },

    #[error("singular Hessian; use gamma > 0")]
    SingularHessian,

    #[error("implicit loss is not convex for these scores (expected score decreases on [{lo}, {hi}])")]
    NonConvexLoss { lo: f64, hi: f64 },

    #[error("leverage too high at match {t}: 1 - xi*l''*a = {denominator:.3e}; increase gamma")]
    LeverageTooHigh { t: usize, denominator: f64 },

    #[error("leave-one-out fit for match {t} failed: {source}")]
    HeldOut {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line search failed at iteration {iterations}")]
    LineSearch {
        iterations: usize,
        trace: Vec<crate::alo::TraceEntry>,
    },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
