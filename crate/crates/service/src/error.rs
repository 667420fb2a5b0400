use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ibn_core::analysis::AnalysisError;
use ibn_core::dbn::DbnError;
use ibn_core::pipeline::PipelineError;
use ibn_core::probit::ProbitError;
use ibn_core::{InferError, NetworkError};
use serde::Serialize;

/// Error response: `{"error": {"code", "message"}}` with an HTTP status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: Detail<'a>,
}

#[derive(Serialize)]
struct Detail<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation_error", message)
    }

    pub fn model_not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "model_not_found",
            format!("no model with id `{id}`"),
        )
    }

    pub fn wrong_kind(id: &str, wanted: &str) -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            "wrong_model_kind",
            format!("model `{id}` is not a {wanted}"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: Detail {
                code: self.code,
                message: &self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<NetworkError> for ApiError {
    fn from(e: NetworkError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

impl From<InferError> for ApiError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::ZeroProbabilityEvidence | InferError::InconsistentEvidence => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "zero_probability_evidence",
                e.to_string(),
            ),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Infer(i) => i.into(),
            AnalysisError::UnknownScenario(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "scenario_not_found", e.to_string())
            }
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Infer(i) => i.into(),
            PipelineError::Management(m) => ApiError::bad_request(m.to_string()),
        }
    }
}

impl From<DbnError> for ApiError {
    fn from(e: DbnError) -> Self {
        match e {
            DbnError::Infer(i) => i.into(),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<ProbitError> for ApiError {
    fn from(e: ProbitError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}
