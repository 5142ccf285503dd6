#![allow(dead_code)]

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Condvar, Mutex};

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use maxproto_core::agents::Engine;
use maxproto_core::backends::{BackendError, Backends, ChatBackend, ChatCapability, MockChat};
use maxproto_core::demo;
use maxproto_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("not json ({e}): {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    call_with(app, method, uri, body, &[]).await
}

pub async fn call_with(app: &Router, method: Method, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub fn demo_wireframe() -> Value {
    serde_json::from_str(demo::WIREFRAME_JSON).unwrap()
}

pub fn small_wireframe() -> Value {
    json!({
        "canvas_w": 360, "canvas_h": 640,
        "components": [
            {"id": "hero", "type": "Image", "x": 0, "y": 0, "w": 360, "h": 240},
            {"id": "title", "type": "Text", "x": 20, "y": 260, "w": 320, "h": 40, "hint": "headline"},
            {"id": "go", "type": "TextButton", "x": 20, "y": 560, "w": 320, "h": 56}
        ]
    })
}

pub fn app_for(engine: Engine) -> (AppState, Router) {
    app_with(engine, ServiceConfig::default())
}

pub fn app_with(engine: Engine, config: ServiceConfig) -> (AppState, Router) {
    let state = AppState::new(Arc::new(engine), config).unwrap();
    (state.clone(), router(state))
}

pub async fn create(app: &Router, prompt: &str, wireframe: Value, seed: u64) -> String {
    let r = call(app, Method::POST, "/v1/sessions", Some(json!({"prompt": prompt, "wireframe": wireframe, "seed": seed}))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    r.json()["session_id"].as_str().unwrap().to_string()
}

fn is_theme(prompt: &str) -> bool {
    prompt.starts_with("TASK: theme")
}

/// Mock chat that parks every sub-agent call until released, announcing
/// the first parked call on `entered`.
pub struct GateChat {
    inner: MockChat,
    open: Mutex<bool>,
    cv: Condvar,
    entered: Mutex<Option<mpsc::Sender<()>>>,
}

impl GateChat {
    pub fn new() -> (Arc<Self>, mpsc::Receiver<()>) {
        let (tx, rx) = mpsc::channel();
        let g = Arc::new(Self { inner: MockChat::new(), open: Mutex::new(false), cv: Condvar::new(), entered: Mutex::new(Some(tx)) });
        (g, rx)
    }

    pub fn release(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }
}

impl ChatBackend for GateChat {
    fn capability(&self) -> &ChatCapability {
        self.inner.capability()
    }

    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError> {
        if !is_theme(prompt) {
            if let Some(tx) = self.entered.lock().unwrap().take() {
                tx.send(()).unwrap();
            }
            let mut open = self.open.lock().unwrap();
            while !*open {
                open = self.cv.wait(open).unwrap();
            }
        }
        self.inner.complete(prompt, seed)
    }
}

/// Mock chat that fails calls for one component (or the theme) while armed.
pub struct FaultChat {
    inner: MockChat,
    marker: String,
    pub armed: AtomicBool,
}

impl FaultChat {
    /// Fails prompts that name `component` ("id (Type)").
    pub fn component(component: &str) -> Arc<Self> {
        Arc::new(Self { inner: MockChat::new(), marker: component.to_string(), armed: AtomicBool::new(true) })
    }

    pub fn theme() -> Arc<Self> {
        Self::component("TASK: theme")
    }

    pub fn disarm(&self) {
        self.armed.store(false, Ordering::SeqCst);
    }
}

impl ChatBackend for FaultChat {
    fn capability(&self) -> &ChatCapability {
        self.inner.capability()
    }

    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError> {
        if self.armed.load(Ordering::SeqCst) && prompt.contains(&self.marker) {
            return Err(BackendError::Status { provider: "fault".into(), status: 503, message: "injected".into() });
        }
        self.inner.complete(prompt, seed)
    }
}

pub fn engine_with_chat(chat: Arc<dyn ChatBackend>) -> Engine {
    demo::engine_with(Backends { chat, ..Backends::mock() })
}
