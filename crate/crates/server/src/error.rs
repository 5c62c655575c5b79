use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lighthouse_api::{ErrorBody, ErrorKind};
use lighthouse_core::experiments::{ConfigError, ExperimentError};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    pub fn new(
        status: StatusCode,
        kind: ErrorKind,
        field: Option<String>,
        message: impl Into<String>,
    ) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                kind,
                field,
                message: message.into(),
            },
        }
    }

    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::InvalidInput,
            Some(field.into()),
            message,
        )
    }

    pub fn body(message: impl Into<String>) -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            ErrorKind::InvalidInput,
            None,
            message,
        )
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, ErrorKind::NotFound, None, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            ErrorKind::Internal,
            None,
            message,
        )
    }

    pub fn simulation(message: impl Into<String>) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::SimulationFailed,
            None,
            message,
        )
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        ApiError::invalid(e.field, e.message)
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::ConfigJson(j) => ApiError::body(j.to_string()),
            ExperimentError::EmptyFractions | ExperimentError::InvalidFraction(_) => {
                ApiError::invalid("fractions", e.to_string())
            }
            ExperimentError::TooFewTrials { .. } => ApiError::invalid("trials", e.to_string()),
            ExperimentError::InvalidAttempts => ApiError::invalid("k_attempts", e.to_string()),
            ExperimentError::Parse(_) => ApiError::body(e.to_string()),
            ExperimentError::Ledger(_) | ExperimentError::Merlin(_) => {
                ApiError::simulation(e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
