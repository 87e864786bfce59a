use axum::extract::rejection::{BytesRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::body::Bytes;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::community::CommunityError;
use crate::ontology::{ValidationReport, Violation, ViolationCode};
use crate::providers::ProviderError;
use crate::rag::RagError;
use crate::store::StoreError;

/// Every error code the API can return, with its HTTP status.
pub const ERROR_CODES: [(&str, u16); 15] = [
    ("validation_failed", 400),
    ("bad_request", 400),
    ("unauthorized", 401),
    ("forbidden", 403),
    ("not_found", 404),
    ("method_not_allowed", 405),
    ("not_published", 409),
    ("not_pending", 409),
    ("range_conflict", 409),
    ("payload_too_large", 413),
    ("generation_unparseable", 422),
    ("rate_limited", 429),
    ("provider_unavailable", 502),
    ("storage_unavailable", 503),
    ("deadline_exceeded", 504),
];

/// JSON error body. `request_id` is filled in by the request-id layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

impl ApiError {
    /// Panics on a code outside [`ERROR_CODES`].
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        let status = ERROR_CODES
            .iter()
            .find(|(c, _)| *c == code)
            .map(|(_, s)| *s)
            .unwrap_or_else(|| panic!("undocumented error code {code}"));
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
            details: None,
            request_id: None,
        }
    }

    pub fn with_details(mut self, details: impl Serialize) -> Self {
        self.details = serde_json::to_value(details).ok();
        self
    }

    pub fn validation(report: ValidationReport) -> Self {
        Self::new("validation_failed", report.to_string()).with_details(report)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("bad_request", message)
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new("not_found", format!("{what} not found"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self)).into_response()
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        match e.root() {
            ProviderError::EmptyInput => Self::bad_request(e.to_string()),
            _ => Self::new("provider_unavailable", e.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::ValidationFailed(r) => Self::validation(r),
            StoreError::InvalidQuery(m) => Self::bad_request(m),
            StoreError::Embedding(p) => p.into(),
            other => Self::new("storage_unavailable", other.to_string()),
        }
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        match e {
            RagError::InvalidInput(m) => Self::validation(ValidationReport::from_violations(vec![
                Violation::new("description", ViolationCode::Empty, m),
            ])),
            RagError::UnknownTemplate(_) | RagError::UnknownProvider(_) | RagError::PromptTooLarge { .. } => {
                Self::bad_request(e.to_string())
            }
            RagError::Provider(p) => p.into(),
            RagError::Store(s) => s.into(),
            RagError::ExhaustedRetries {
                attempts,
                ref failure,
                ref raw_model_text,
            } => Self::new("generation_unparseable", e.to_string()).with_details(serde_json::json!({
                "attempts": attempts,
                "failure": failure.to_string(),
                "raw_model_text": raw_model_text,
            })),
        }
    }
}

impl From<CommunityError> for ApiError {
    fn from(e: CommunityError) -> Self {
        match e {
            CommunityError::ValidationFailed(r) => Self::validation(r),
            CommunityError::InvalidInput(m) => Self::bad_request(m),
            CommunityError::NotFound(what) => Self::new("not_found", format!("{what} not found")),
            CommunityError::NotPublished(_) => Self::new("not_published", e.to_string()),
            CommunityError::NotPending(_) => Self::new("not_pending", e.to_string()),
            CommunityError::Store(s) => s.into(),
        }
    }
}

impl From<BytesRejection> for ApiError {
    fn from(e: BytesRejection) -> Self {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            Self::new("payload_too_large", e.body_text())
        } else {
            Self::bad_request(e.body_text())
        }
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        Self::new("not_found", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

/// JSON body extractor whose failures are [`ApiError`]s: malformed JSON is
/// `bad_request`, a shape mismatch is `validation_failed` with the path.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state).await?;
        decode_json(&bytes).map(ApiJson)
    }
}

pub(crate) fn decode_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice::<serde::de::IgnoredAny>(bytes)
        .map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))?;
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = match e.path().to_string() {
            p if p == "." => String::new(),
            p => p,
        };
        let message = e.inner().to_string();
        let code = if message.starts_with("missing field") {
            ViolationCode::Missing
        } else if message.starts_with("unknown field") {
            ViolationCode::Unknown
        } else {
            ViolationCode::Invalid
        };
        ApiError::validation(ValidationReport::from_violations(vec![Violation::new(path, code, message)]))
    })
}
