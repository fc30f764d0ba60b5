use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;
use translaw_core::pipeline::FieldError;
use translaw_core::{AnnotateError, CoreError, PipelineError};

/// Startup failures.
#[derive(Debug, Error)]
pub enum ServerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] translaw_core::GatewayError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Memory(#[from] translaw_core::memory::MemoryError),
    #[error(transparent)]
    Glossary(#[from] translaw_core::glossary::GlossaryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
}

/// A request failure rendered as `{error, fields?, line?}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: message.into(), fields: Vec::new(), line: None } }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, what)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        let mut err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
        err.body.line = e.line();
        err
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::EmptyDocument => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            other => Self::bad_request(other.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidConfig(fields) => {
                let mut err = Self::bad_request("invalid job config");
                err.body.fields = fields;
                err
            }
            PipelineError::EmptyDocument => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            PipelineError::WrongState { .. } | PipelineError::IllegalTransition { .. } => Self::conflict(e.to_string()),
            PipelineError::Annotation(a) => a.into(),
            PipelineError::ParagraphOutOfRange { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
