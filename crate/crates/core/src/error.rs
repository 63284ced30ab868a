use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("transition row (state {state}, action {action}) is not a probability distribution: {reason}")]
    InvalidTransitionRow {
        state: usize,
        action: usize,
        reason: String,
    },

    #[error("implemented action {taken} is neither the recommendation {recommended} nor the baseline {baseline}")]
    ProtocolViolation {
        taken: usize,
        recommended: usize,
        baseline: usize,
    },

    #[error("state {0} has no admissible action")]
    NoAdmissibleAction(usize),

    #[error("value iteration did not converge after {iterations} iterations (last change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear policy evaluation failed (residual {residual:e})")]
    Evaluation { residual: f64 },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
