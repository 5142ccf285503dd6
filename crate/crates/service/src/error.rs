//! Error documents: every failure is `{code, message, detail?}`.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use maxproto_core::agents::{AgentError, OrchestrationError, RegenerateError};
use maxproto_core::backends::BackendError;
use maxproto_core::model::WireframeError;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.to_string(), message: message.into(), detail: None } }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.body.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self::bad_request(message).with_detail(json!({ "field": field }))
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}"))
            .with_detail(json!({ "session_id": id }))
    }

    pub fn busy(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "generation_in_progress", format!("session {id:?} is busy with another mutation"))
    }

    pub fn not_generated(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "not_generated", format!("session {id:?} has no prototype yet; call generate first"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn wireframe(e: &WireframeError) -> Self {
        let mut detail = json!({ "field": "wireframe" });
        if let Some(c) = e.component() {
            detail["component"] = json!(c);
        }
        Self::new(StatusCode::BAD_REQUEST, "invalid_wireframe", e.to_string()).with_detail(detail)
    }

    /// Maps an agent failure to a status and typed cause.
    pub fn agent(e: &AgentError) -> Self {
        match e {
            AgentError::PromptBudget(_) => {
                Self::new(StatusCode::BAD_REQUEST, "prompt_too_long", e.to_string()).with_detail(json!({ "field": "prompt" }))
            }
            AgentError::Template(_) | AgentError::Dispatch(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "engine_misconfigured", e.to_string())
            }
            _ => Self::new(StatusCode::BAD_GATEWAY, "backend_failure", e.to_string())
                .with_detail(json!({ "cause": cause(e) })),
        }
    }

    pub fn orchestration(e: &OrchestrationError) -> Self {
        match e {
            OrchestrationError::Theme(a) => Self::agent(a),
            OrchestrationError::Partial(p) => {
                let completed: Vec<&str> = p.completed.iter().map(|r| r.component_id.as_str()).collect();
                Self::new(StatusCode::BAD_GATEWAY, "partial_failure", e.to_string()).with_detail(json!({
                    "failed_component": p.failed_component,
                    "completed": completed,
                    "cause": cause(&p.source),
                }))
            }
        }
    }

    pub fn regenerate(e: &RegenerateError) -> Self {
        match e {
            RegenerateError::UnknownComponent(id) => unknown_component(id),
            RegenerateError::Mismatch => Self::internal(e.to_string()),
            RegenerateError::Agent(a) => {
                let mut err = Self::agent(a);
                if let Some(Value::Object(m)) = err.body.detail.as_mut() {
                    m.insert("component".into(), json!(agent_component(a)));
                }
                err
            }
        }
    }
}

pub fn unknown_component(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_component", format!("no component {id:?} in this session"))
        .with_detail(json!({ "component": id }))
}

fn agent_component(e: &AgentError) -> Option<&str> {
    match e {
        AgentError::EmptyContent { component } | AgentError::EmptyPhrase { component } | AgentError::Crop { component } => {
            Some(component)
        }
        _ => None,
    }
}

/// Machine-readable cause: `{kind, message}`.
pub fn cause(e: &AgentError) -> Value {
    let kind = match e {
        AgentError::Backend(b) => backend_kind(b),
        AgentError::Knowledge(_) => "knowledge",
        AgentError::Template(_) => "template",
        AgentError::PromptBudget(_) => "prompt_budget",
        AgentError::Dispatch(_) => "dispatch",
        AgentError::ThemeUnparseable(_) => "theme_unparseable",
        AgentError::EmptyContent { .. } => "empty_content",
        AgentError::EmptyPhrase { .. } => "empty_phrase",
        AgentError::Crop { .. } => "crop",
        AgentError::EmptyRegion => "empty_region",
        AgentError::ImageDims { .. } => "image_dims",
    };
    json!({ "kind": kind, "message": e.to_string() })
}

fn backend_kind(b: &BackendError) -> &'static str {
    match b {
        BackendError::Authentication { .. } => "authentication",
        BackendError::RateLimited { .. } => "rate_limited",
        BackendError::Timeout { .. } => "timeout",
        BackendError::Status { .. } => "status",
        BackendError::Transport { .. } => "transport",
        BackendError::Malformed { .. } => "malformed",
        BackendError::DimensionMismatch { .. } => "dimension_mismatch",
        BackendError::Unsupported(_) => "unsupported",
        BackendError::Failed(_) => "failed",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.status.as_u16(), self.body.code, self.body.message)
    }
}

impl std::error::Error for ApiError {}
