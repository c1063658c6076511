use thiserror::Error;

use crate::montecarlo::TrialTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config document could not be parsed: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("unknown blocking profile `{name}` at `{field}` (expected none, low, high or explicit rates)")]
    UnknownBlocking { field: String, name: String },

    #[error("ISI mitigation is unstable: {0}; increase ts to shrink the normalized gains")]
    Unstable(String),

    #[error("could not bracket a slot duration for target normalized gain {target}")]
    NoBracket { target: f64 },

    #[error("bound count {y} is outside 0..={n}")]
    CountOutOfRange { y: u32, n: u32 },

    #[error("adaptive threshold needs p_b(1) > p_b(0), got p_b(1) = {p1}, p_b(0) = {p0}")]
    ThresholdOrdering { p1: f64, p0: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("simulation invariant violated at super slot {}: {reason}", trace.k)]
    Simulation { reason: String, trace: Box<TrialTrace> },

    #[error("sweep point {point}: {source}")]
    SweepPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("comparison failed: {0}")]
    Comparison(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
