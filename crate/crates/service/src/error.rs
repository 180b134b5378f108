use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;

/// Error body returned by every endpoint: `{code, message, field?}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} `{id}`"))
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            field: Some(field.into()),
            ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
        }
    }

    pub fn solving(job_id: &str) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            format!("session is solving (job `{job_id}`); wait for it or cancel it"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<pmresched::Error> for ApiError {
    fn from(err: pmresched::Error) -> Self {
        use pmresched::Error as E;
        let message = err.to_string();
        match err {
            E::UnknownId { .. } => ApiError::new(StatusCode::NOT_FOUND, "not_found", message),
            E::Integrity(_) => ApiError::new(StatusCode::CONFLICT, "integrity", message),
            E::Validation { field, .. } => ApiError {
                field: Some(field),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
            },
            E::Range(_) | E::Parameter(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message),
            E::PinViolation(_) => ApiError::new(StatusCode::CONFLICT, "pinned", message),
            E::Stale { .. } => ApiError::new(StatusCode::CONFLICT, "stale", message),
            E::State(_) | E::Uninitialized(_) => ApiError::new(StatusCode::CONFLICT, "state", message),
            E::Io(_) | E::Json(_) | E::Csv(_) => ApiError::internal(message),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.status, self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message, "request failed");
        }
        (self.status, axum::Json(&self)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
