//! Session-based HTTP API over the prototype engine.
//!
//! ```text
//! POST /v1/sessions                                   create + theme      201
//! GET  /v1/sessions/{id}                              session view
//! POST /v1/sessions/{id}/generate                     full sub-agent pass
//! POST /v1/sessions/{id}/components/{cid}/regenerate  one component
//! GET  /v1/sessions/{id}/prototype.svg                export
//! GET  /v1/sessions/{id}/prototype.json               export
//! ```
//!
//! Engine calls are blocking and run on the blocking pool. Mutations on a
//! session are serialized by a try-lock, so a second concurrent mutation
//! gets 409 instead of queueing.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use chrono::{Duration, Utc};
use maxproto_core::agents::{Engine, OrchestrationError};
use maxproto_core::model::{
    parse_wireframe_value, ComponentProvenance, GenerationRequest, Payload, Prototype, Raster, RequestError,
};
use maxproto_core::render::{render_document, render_svg, RenderOptions};
use serde::de::DeserializeOwned;
use serde_json::json;
use thiserror::Error;

pub mod api;
pub mod error;
pub mod session;

use api::{ComponentSummary, CreateSessionBody, Generated, PayloadEdit, Regenerated, RegenerateBody, SessionCreated, SessionView};
pub use error::{ApiError, ErrorBody};
use session::{load_snapshots, new_session_id, restore, write_snapshot, SessionData, SessionSlot, SessionStore, SnapshotError};

/// Backend name recorded in provenance for manual payload edits.
pub const MANUAL_EDIT_BACKEND: &str = "manual-edit";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    pub snapshot_dir: Option<PathBuf>,
    /// SVG export size. Rasters are always inlined.
    pub render: RenderOptions,
    /// Derive the export height from each session's canvas aspect ratio.
    pub fit_canvas: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session_ttl: Duration::hours(24),
            snapshot_dir: None,
            render: RenderOptions { out_w: 360, ..RenderOptions::default() },
            fit_canvas: true,
        }
    }
}

impl ServiceConfig {
    pub fn with_ttl_hours(mut self, hours: u32) -> Self {
        self.session_ttl = Duration::hours(i64::from(hours));
        self
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid service configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

#[derive(Debug)]
struct Inner {
    engine: Arc<Engine>,
    sessions: SessionStore,
    config: ServiceConfig,
}

#[derive(Debug, Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Builds the state, restoring sessions from the snapshot directory if
    /// one is configured.
    pub fn new(engine: Arc<Engine>, mut config: ServiceConfig) -> Result<Self, ServiceError> {
        config.render.embed_rasters = true;
        config.render.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        if config.session_ttl <= Duration::zero() {
            return Err(ServiceError::Config("session TTL must be positive".into()));
        }
        let sessions = SessionStore::new(config.session_ttl);
        if let Some(dir) = &config.snapshot_dir {
            let restored = load_snapshots(dir)?;
            tracing::info!(count = restored.len(), dir = %dir.display(), "restored sessions");
            restore(&sessions, restored, Utc::now());
        }
        Ok(Self(Arc::new(Inner { engine, sessions, config })))
    }

    pub fn engine(&self) -> &Engine {
        &self.0.engine
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.0.sessions
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    /// SVG options for a session.
    pub fn render_options(&self, s: &SessionData) -> RenderOptions {
        let c = &self.0.config;
        let wf = &s.request.wireframe;
        if c.fit_canvas {
            c.render.fit_canvas(wf.canvas_w, wf.canvas_h)
        } else {
            c.render
        }
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.0.sessions.get(id, Utc::now()).ok_or_else(|| ApiError::session_not_found(id))
    }

    /// Persists `data` (when snapshots are on) and makes it current.
    async fn commit(&self, slot: &SessionSlot, data: SessionData) -> Result<(), ApiError> {
        if let Some(dir) = self.0.config.snapshot_dir.clone() {
            let snap = data.clone();
            blocking(move || write_snapshot(&dir, &snap))
                .await?
                .map_err(|e| ApiError::internal(format!("snapshot failed: {e}")))?;
        }
        slot.commit(data);
        Ok(())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/generate", post(generate))
        .route("/v1/sessions/{id}/components/{cid}/regenerate", post(regenerate))
        .route("/v1/sessions/{id}/prototype.svg", get(export_svg))
        .route("/v1/sessions/{id}/prototype.json", get(export_json))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint") })
        .with_state(state)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

/// Empty bodies parse as `{}`.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let body: CreateSessionBody = parse_body(&body)?;
    let prompt = body.prompt.ok_or_else(|| ApiError::field("prompt", "field \"prompt\" is required"))?;
    let wf = body.wireframe.ok_or_else(|| ApiError::field("wireframe", "field \"wireframe\" is required"))?;
    let wireframe = parse_wireframe_value(wf).map_err(|e| ApiError::wireframe(&e))?;
    let request = GenerationRequest::new(prompt, wireframe, body.seed).map_err(|e| match e {
        RequestError::EmptyPrompt => ApiError::field("prompt", e.to_string()),
    })?;

    let engine = st.0.engine.clone();
    let req = request.clone();
    let theme = blocking(move || engine.generate_theme(&req)).await?.map_err(|e| ApiError::agent(&e))?;

    let now = Utc::now();
    let swept = st.0.sessions.sweep(now);
    if swept > 0 {
        tracing::info!(swept, "expired sessions removed");
    }
    let data = SessionData {
        id: new_session_id(),
        request,
        theme,
        prototype: None,
        revision: 1,
        created_at: now,
        updated_at: now,
    };
    if let Some(dir) = st.0.config.snapshot_dir.clone() {
        let snap = data.clone();
        blocking(move || write_snapshot(&dir, &snap))
            .await?
            .map_err(|e| ApiError::internal(format!("snapshot failed: {e}")))?;
    }
    let out = SessionCreated {
        session_id: data.id.clone(),
        revision: data.revision,
        theme: data.theme.theme.clone(),
        references: data.theme.provenance.references.clone(),
    };
    st.0.sessions.insert(data, now);
    tracing::info!(session = %out.session_id, "session created");
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(SessionView::new(&st.slot(&id)?.current())))
}

async fn generate(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Generated>, ApiError> {
    let slot = st.slot(&id)?;
    let mut pending = slot.writer.try_lock().map_err(|_| ApiError::busy(&id))?;
    let cur = slot.current();
    let partial = pending.take();
    let resumed = partial.as_ref().map_or(0, |p| p.completed.len());
    let engine = st.0.engine.clone();
    let (req, theme) = (cur.request.clone(), cur.theme.clone());
    let outcome = blocking(move || match partial {
        Some(p) => engine.resume(&req, p),
        None => engine.generate_components(&req, theme),
    })
    .await?;
    let mut proto = match outcome {
        Ok(p) => p,
        Err(e) => {
            let err = ApiError::orchestration(&e);
            if let OrchestrationError::Partial(p) = e {
                tracing::warn!(session = %id, failed = %p.failed_component, "partial generation kept for resumption");
                *pending = Some(*p);
            }
            return Err(err);
        }
    };
    proto.provenance.session = Some(id.clone());
    let next = cur.with_prototype(proto, Utc::now());
    let components = ComponentSummary::all(next.prototype.as_ref().expect("just installed"));
    let revision = next.revision;
    st.commit(&slot, next).await?;
    Ok(Json(Generated { session_id: id, revision, resumed, components }))
}

fn valid_hex(hex: &str) -> Option<String> {
    let digits = hex.strip_prefix('#')?;
    (digits.len() == 6 && digits.chars().all(|c| c.is_ascii_hexdigit())).then(|| format!("#{}", digits.to_ascii_uppercase()))
}

/// Builds the payload for a manual edit.
fn edited_payload(engine: &Engine, edit: PayloadEdit) -> Result<Payload, ApiError> {
    Ok(match edit {
        PayloadEdit::Text { text } => {
            if text.trim().is_empty() {
                return Err(ApiError::field("payload.text", "replacement text must be non-empty"));
            }
            Payload::Text { text, truncated: false }
        }
        PayloadEdit::Image { image_base64, prompt } => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(image_base64.trim().as_bytes())
                .map_err(|e| ApiError::field("payload.image_base64", format!("bad base64: {e}")))?;
            let raster = Raster::decode(&bytes)
                .map_err(|e| ApiError::field("payload.image_base64", format!("undecodable image: {e}")))?;
            Payload::Image { raster, prompt: prompt.unwrap_or_default() }
        }
        PayloadEdit::Icon { icon_name, phrase } => {
            let icon = engine
                .icon_store()
                .get(&icon_name)
                .ok_or_else(|| ApiError::field("payload.icon_name", format!("no icon named {icon_name:?}")))?;
            Payload::Icon { phrase: phrase.unwrap_or_else(|| icon_name.clone()), icon_name, svg: icon.svg.clone() }
        }
        PayloadEdit::Color { hex } => Payload::Color {
            hex: valid_hex(&hex).ok_or_else(|| ApiError::field("payload.hex", format!("{hex:?} is not #RRGGBB")))?,
        },
    })
}

async fn regenerate(
    State(st): State<AppState>,
    Path((id, cid)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<Regenerated>, ApiError> {
    let body: RegenerateBody = parse_body(&body)?;
    if body.user_override.is_some() && body.payload.is_some() {
        return Err(ApiError::bad_request("give either \"override\" or \"payload\", not both"));
    }
    let slot = st.slot(&id)?;
    let _writer = slot.writer.try_lock().map_err(|_| ApiError::busy(&id))?;
    let cur = slot.current();
    let proto = cur.prototype.as_ref().ok_or_else(|| ApiError::not_generated(&id))?;
    let idx = cur
        .request
        .wireframe
        .components
        .iter()
        .position(|c| c.id == cid)
        .ok_or_else(|| error::unknown_component(&cid))?;
    let comp = &cur.request.wireframe.components[idx];
    let engine = st.0.engine.clone();

    let next: Prototype = match body.payload {
        Some(edit) => {
            let expected = engine.dispatch().handler(comp.ctype).map_err(|e| ApiError::internal(e.to_string()))?;
            if edit.kind() != expected.payload_kind() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "payload_kind_mismatch",
                    format!("component {cid:?} ({}) takes {} payloads, got {}", comp.ctype, expected.payload_kind(), edit.kind()),
                )
                .with_detail(json!({
                    "component": cid,
                    "expected": expected.payload_kind(),
                    "got": edit.kind(),
                })));
            }
            let payload = edited_payload(&engine, edit)?;
            let prev = &proto.provenance.components[idx];
            let mut next = proto.clone();
            next.results[idx].payload = payload;
            next.provenance.components[idx] = ComponentProvenance {
                component_id: cid.clone(),
                handler: expected,
                prompt: String::new(),
                request_prompt: None,
                backend: MANUAL_EDIT_BACKEND.to_string(),
                seed: prev.seed,
                attempt: prev.attempt,
            };
            next
        }
        None => {
            let attempt = body.attempt.unwrap_or_else(|| proto.provenance.components[idx].attempt.saturating_add(1));
            let (req, proto, cid2, ovr) = (cur.request.clone(), proto.clone(), cid.clone(), body.user_override);
            blocking(move || engine.regenerate_component(&req, &proto, &cid2, ovr.as_deref(), attempt))
                .await?
                .map_err(|e| ApiError::regenerate(&e))?
        }
    };
    let summary = ComponentSummary::new(&next.results[idx], &next.provenance.components[idx]);
    let data = cur.with_prototype(next, Utc::now());
    let revision = data.revision;
    st.commit(&slot, data).await?;
    Ok(Json(Regenerated { session_id: id, revision, component: summary }))
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("etag is ascii")
}

fn not_modified(headers: &HeaderMap, tag: &HeaderValue) -> bool {
    headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == "*" || t.trim() == tag.to_str().unwrap_or_default()))
}

#[derive(Clone, Copy)]
enum Export {
    Svg,
    Json,
}

async fn export(st: AppState, id: String, headers: HeaderMap, kind: Export) -> Result<Response, ApiError> {
    let cur = st.slot(&id)?.current();
    if cur.prototype.is_none() {
        return Err(ApiError::not_generated(&id));
    }
    let tag = etag(cur.revision);
    if not_modified(&headers, &tag) {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, tag)]).into_response());
    }
    let opts = st.render_options(&cur);
    let rendered = blocking(move || {
        let proto = cur.prototype.as_ref().expect("checked above");
        match kind {
            Export::Svg => render_svg(proto, &opts),
            Export::Json => render_document(proto, true),
        }
    })
    .await?
    .map_err(|e| ApiError::internal(format!("render failed: {e}")))?;
    let content_type = match kind {
        Export::Svg => "image/svg+xml",
        Export::Json => "application/json",
    };
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static(content_type)), (header::ETAG, tag)],
        rendered.text,
    )
        .into_response())
}

async fn export_svg(State(st): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    export(st, id, headers, Export::Svg).await
}

async fn export_json(State(st): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    export(st, id, headers, Export::Json).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_validation_normalizes_case() {
        assert_eq!(valid_hex("#a1b2c3").as_deref(), Some("#A1B2C3"));
        assert_eq!(valid_hex("a1b2c3"), None);
        assert_eq!(valid_hex("#a1b2c"), None);
        assert_eq!(valid_hex("#g1b2c3"), None);
    }

    #[test]
    fn if_none_match_handles_lists_and_wildcards() {
        let tag = etag(3);
        let mut h = HeaderMap::new();
        assert!(!not_modified(&h, &tag));
        h.insert(header::IF_NONE_MATCH, HeaderValue::from_static("\"2\", \"3\""));
        assert!(not_modified(&h, &tag));
        h.insert(header::IF_NONE_MATCH, HeaderValue::from_static("\"2\""));
        assert!(!not_modified(&h, &tag));
        h.insert(header::IF_NONE_MATCH, HeaderValue::from_static("*"));
        assert!(not_modified(&h, &tag));
    }

    #[test]
    fn ttl_must_be_positive() {
        let engine = Arc::new(maxproto_core::demo::mock_engine());
        let cfg = ServiceConfig { session_ttl: Duration::zero(), ..Default::default() };
        assert!(matches!(AppState::new(engine, cfg), Err(ServiceError::Config(_))));
    }
}
