use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;
use unicbe::aggregation::AggregationError;
use unicbe::allocation::AllocError;
use unicbe::session::SessionError;

use crate::api::{ErrorBody, MissingResponse};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{message}")]
    Invalid {
        message: String,
        missing: Vec<MissingResponse>,
    },
    #[error("a session named {0:?} already exists")]
    DuplicateName(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("assignment {0} is unknown or has expired")]
    Gone(String),
    #[error("assignment {0} was already submitted")]
    AlreadySubmitted(String),
    #[error("missing or wrong token")]
    Unauthorized,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error("session store: {0}")]
    Store(String),
}

impl ServiceError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ServiceError::Invalid {
            message: message.into(),
            missing: Vec::new(),
        }
    }

    pub fn store(e: impl std::fmt::Display) -> Self {
        ServiceError::Store(e.to_string())
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::DuplicateName(_) | ServiceError::AlreadySubmitted(_) => StatusCode::CONFLICT,
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::Gone(_) => StatusCode::GONE,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Session(_) | ServiceError::Alloc(_) | ServiceError::Aggregation(_) | ServiceError::Store(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        let missing = match &self {
            ServiceError::Invalid { missing, .. } => missing.clone(),
            _ => Vec::new(),
        };
        let body = ErrorBody {
            error: self.to_string(),
            missing,
        };
        (status, Json(body)).into_response()
    }
}
