use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("round {got} is not pending; the pending round is {expected}")]
    StaleRound { expected: u64, got: u64 },
    #[error("{0}")]
    Rejected(String),
    #[error(transparent)]
    Core(#[from] adherence_core::Error),
    #[error("{0}")]
    Internal(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    row: Option<RowRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_round: Option<u64>,
}

/// Offending transition row of an uploaded MDP.
#[derive(Serialize)]
struct RowRef {
    state: usize,
    action: usize,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use adherence_core::Error as E;
        match self {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::StaleRound { .. } => StatusCode::CONFLICT,
            ServiceError::Rejected(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Core(E::ProtocolViolation { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Core(
                E::InvalidInput(_) | E::InvalidTransitionRow { .. } | E::NoAdmissibleAction(_) | E::Json(_),
            ) => StatusCode::BAD_REQUEST,
            ServiceError::Core(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let row = match &self {
            ServiceError::Core(adherence_core::Error::InvalidTransitionRow { state, action, .. }) => Some(RowRef {
                state: *state,
                action: *action,
            }),
            _ => None,
        };
        let expected_round = match &self {
            ServiceError::StaleRound { expected, .. } => Some(*expected),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            row,
            expected_round,
        };
        (self.status(), Json(body)).into_response()
    }
}
