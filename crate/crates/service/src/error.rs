use std::path::PathBuf;

use axum::http::StatusCode;
use shear_core::data::Target;
use shear_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Model(PathBuf, Box<StartupError>),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("no model loaded; pass --friction-model and/or --cohesion-model")]
    NoModels,
    #[error("the loaded models use different feature schemas")]
    SchemaMismatch,
    #[error("two models predict {0}")]
    DuplicateTarget(Target),
    #[error("summary for {0} has no matching model loaded")]
    SummaryTarget(Target),
    #[error("summary for {0} was computed from a different model file")]
    SummaryChecksum(Target),
    #[error("{0}: malformed summary: {1}")]
    Summary(PathBuf, String),
    #[error("invalid service configuration: {0}")]
    Config(String),
}

/// A failed request: status plus a one-line reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    pub fn unavailable(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: message.into(),
        }
    }

    pub fn too_large(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::PAYLOAD_TOO_LARGE,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_)
            | CoreError::ExactLimit { .. }
            | CoreError::NonFinite(_)
            | CoreError::OutOfBounds { .. }
            | CoreError::Schema(_)
            | CoreError::LengthMismatch { .. } => ApiError::bad_request(e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}
