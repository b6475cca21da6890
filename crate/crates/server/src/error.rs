use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};
use tutorflow_core::access::DenyReason;
use tutorflow_core::model::ValidationErrors;

use crate::store::StoreError;

pub const SCHEMA_VERSION: u32 = 1;

/// An error response: `{"schema_version": 1, "error": code, "message": ...}`
/// plus optional detail fields.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

pub type ApiResult<T> = Result<T, ApiError>;

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), detail: None }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn deny(reason: DenyReason) -> Self {
        let (status, code) = match reason {
            DenyReason::Expired => (StatusCode::UNAUTHORIZED, "token_expired"),
            DenyReason::BadSignature => (StatusCode::UNAUTHORIZED, "bad_token"),
            DenyReason::Forbidden => (StatusCode::FORBIDDEN, "forbidden"),
            DenyReason::NotLinked => (StatusCode::FORBIDDEN, "not_linked"),
        };
        Self::new(status, code, reason.to_string())
    }
}

impl From<ValidationErrors> for ApiError {
    fn from(errs: ValidationErrors) -> Self {
        let fields: Vec<Value> = errs
            .0
            .iter()
            .map(|e| json!({"field": e.field(), "error": e, "message": e.to_string()}))
            .collect();
        ApiError::new(StatusCode::BAD_REQUEST, "validation", errs.to_string()).with_detail(json!({ "fields": fields }))
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(kind, id) => ApiError::not_found(format!("{kind:?} `{id}`")),
            StoreError::InvalidId(id) => ApiError::bad_request(format!("invalid id `{id}`")),
            other => {
                tracing::error!(error = %other, "storage failure");
                ApiError::internal("storage failure")
            }
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": self.code,
            "message": self.message,
        });
        if let Some(Value::Object(extra)) = self.detail {
            body.as_object_mut().unwrap().extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

/// `Json<T>` whose rejections use the API error shape.
pub struct JsonBody<T>(pub T);

impl<S, T> axum::extract::FromRequest<S> for JsonBody<T>
where
    T: serde::de::DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(JsonBody(v)),
            Err(rejection) => Err(ApiError::new(rejection.status(), "bad_request", rejection.body_text())),
        }
    }
}
