//! HTTP adapters for chat-completions, embeddings and diffusion-server style
//! endpoints.

use std::env;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde_json::{json, Value};

use super::{
    BackendError, ChatBackend, ChatCapability, EmbeddingBackend, EmbeddingCapability, ImageBackend,
    ImageCapability, ImageRequest, RetryPolicy,
};
use crate::model::Raster;

pub const ENV_CHAT_URL: &str = "MAXPROTO_CHAT_URL";
pub const ENV_CHAT_KEY: &str = "MAXPROTO_CHAT_KEY";
pub const ENV_EMBED_URL: &str = "MAXPROTO_EMBED_URL";
pub const ENV_EMBED_KEY: &str = "MAXPROTO_EMBED_KEY";
pub const ENV_IMAGE_URL: &str = "MAXPROTO_IMAGE_URL";

const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub chat_url: Option<String>,
    pub chat_key: Option<String>,
    pub chat_model: String,
    pub chat_max_input_chars: usize,
    pub embed_url: Option<String>,
    pub embed_key: Option<String>,
    pub embed_model: String,
    pub embed_dim: usize,
    pub image_url: Option<String>,
    pub image_width: u32,
    pub image_height: u32,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            chat_url: None,
            chat_key: None,
            chat_model: "gpt-4".into(),
            chat_max_input_chars: 32_000,
            embed_url: None,
            embed_key: None,
            embed_model: "text-embedding-ada-002".into(),
            embed_dim: 1536,
            image_url: None,
            image_width: 512,
            image_height: 512,
            timeout: Duration::from_secs(120),
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl RemoteConfig {
    /// Defaults with endpoint URLs and keys taken from `MAXPROTO_*` variables.
    pub fn from_env() -> Self {
        let var = |k: &str| env::var(k).ok().filter(|v| !v.is_empty());
        Self {
            chat_url: var(ENV_CHAT_URL),
            chat_key: var(ENV_CHAT_KEY),
            embed_url: var(ENV_EMBED_URL),
            embed_key: var(ENV_EMBED_KEY),
            image_url: var(ENV_IMAGE_URL),
            ..Self::default()
        }
    }
}

/// One logged request/response pair. Credentials never appear here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub provider: String,
    pub url: String,
    pub authorization: Option<String>,
    pub request_body: String,
    pub status: Option<u16>,
    pub response_body: String,
}

pub type ExchangeLog = Arc<Mutex<Vec<Exchange>>>;

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { permits: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().expect("semaphore poisoned");
        while *p == 0 {
            p = self.cv.wait(p).expect("semaphore poisoned");
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

struct Endpoint {
    provider: String,
    url: String,
    key: Option<String>,
    agent: ureq::Agent,
    gate: Semaphore,
    retry: RetryPolicy,
    log: Option<ExchangeLog>,
}

fn provider_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| match v.get("error") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(e) => e.get("message").and_then(Value::as_str).map(str::to_string),
            None => v.get("message").and_then(Value::as_str).map(str::to_string),
        })
        .unwrap_or_else(|| body.chars().take(500).collect())
}

impl Endpoint {
    fn new(provider: &str, url: Option<String>, key: Option<String>, cfg: &RemoteConfig) -> Result<Self, BackendError> {
        let url = url.ok_or_else(|| BackendError::Unsupported(format!("no endpoint URL configured for {provider}")))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            provider: provider.to_string(),
            url,
            key,
            agent,
            gate: Semaphore::new(cfg.max_in_flight),
            retry: cfg.retry,
            log: None,
        })
    }

    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let body = body.to_string();
        self.retry.run(|| {
            let _permit = self.gate.acquire();
            self.post_once(&body)
        })
    }

    fn post_once(&self, body: &str) -> Result<Value, BackendError> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(k) = &self.key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let redacted = self.key.as_ref().map(|_| "Bearer [REDACTED]".to_string());
        tracing::debug!(provider = %self.provider, url = %self.url, auth = ?redacted, body, "backend request");

        let outcome = req.send(body);
        let (status, text) = match outcome {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().with_config().limit(MAX_BODY_BYTES).read_to_string().map_err(|e| {
                    BackendError::Transport { provider: self.provider.clone(), message: e.to_string() }
                })?;
                (Some(status), text)
            }
            Err(e) => {
                self.record(body, &redacted, None, e.to_string());
                return Err(match e {
                    ureq::Error::Timeout(_) => BackendError::Timeout { provider: self.provider.clone() },
                    other => BackendError::Transport { provider: self.provider.clone(), message: other.to_string() },
                });
            }
        };
        self.record(body, &redacted, status, text.clone());
        tracing::debug!(provider = %self.provider, status, response = %text, "backend response");

        let status = status.unwrap_or_default();
        let provider = self.provider.clone();
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| BackendError::Malformed { provider, message: e.to_string() }),
            401 | 403 => Err(BackendError::Authentication { provider, message: provider_message(&text) }),
            429 => Err(BackendError::RateLimited { provider, message: provider_message(&text) }),
            _ => Err(BackendError::Status { provider, status, message: provider_message(&text) }),
        }
    }

    fn record(&self, body: &str, auth: &Option<String>, status: Option<u16>, response: String) {
        if let Some(log) = &self.log {
            log.lock().expect("exchange log poisoned").push(Exchange {
                provider: self.provider.clone(),
                url: self.url.clone(),
                authorization: auth.clone(),
                request_body: body.to_string(),
                status,
                response_body: response,
            });
        }
    }

    fn malformed(&self, message: impl Into<String>) -> BackendError {
        BackendError::Malformed { provider: self.provider.clone(), message: message.into() }
    }
}

/// JSON chat-completions adapter.
pub struct RemoteChat {
    ep: Endpoint,
    model: String,
    cap: ChatCapability,
}

impl RemoteChat {
    pub fn new(cfg: &RemoteConfig) -> Result<Self, BackendError> {
        Ok(Self {
            ep: Endpoint::new("chat", cfg.chat_url.clone(), cfg.chat_key.clone(), cfg)?,
            model: cfg.chat_model.clone(),
            cap: ChatCapability { name: format!("remote-chat:{}", cfg.chat_model), max_input_chars: cfg.chat_max_input_chars },
        })
    }

    pub fn with_exchange_log(mut self, log: ExchangeLog) -> Self {
        self.ep.log = Some(log);
        self
    }
}

impl ChatBackend for RemoteChat {
    fn capability(&self) -> &ChatCapability {
        &self.cap
    }

    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "seed": seed,
        });
        let v = self.ep.post(&body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| self.ep.malformed("missing choices[0].message.content"))
    }
}

/// JSON embeddings adapter.
pub struct RemoteEmbedding {
    ep: Endpoint,
    model: String,
    cap: EmbeddingCapability,
}

impl RemoteEmbedding {
    pub fn new(cfg: &RemoteConfig) -> Result<Self, BackendError> {
        Ok(Self {
            ep: Endpoint::new("embedding", cfg.embed_url.clone(), cfg.embed_key.clone(), cfg)?,
            model: cfg.embed_model.clone(),
            cap: EmbeddingCapability { name: format!("remote-embedding:{}", cfg.embed_model), dim: cfg.embed_dim },
        })
    }

    pub fn with_exchange_log(mut self, log: ExchangeLog) -> Self {
        self.ep.log = Some(log);
        self
    }
}

impl EmbeddingBackend for RemoteEmbedding {
    fn capability(&self) -> &EmbeddingCapability {
        &self.cap
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let v = self.ep.post(&json!({"model": self.model, "input": text}))?;
        let arr = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| self.ep.malformed("missing data[0].embedding"))?;
        let vec = arr
            .iter()
            .map(Value::as_f64)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.ep.malformed("non-numeric embedding entry"))?;
        if vec.len() != self.cap.dim {
            return Err(BackendError::DimensionMismatch { expected: self.cap.dim, got: vec.len() });
        }
        Ok(vec)
    }
}

/// Minimal diffusion-server adapter: `{prompt, width, height, seed,
/// control_image?, init_image?}` with base64 PNG rasters; accepts `image`
/// or `images[0]` in the reply.
pub struct RemoteImage {
    ep: Endpoint,
    cap: ImageCapability,
}

impl RemoteImage {
    pub fn new(cfg: &RemoteConfig) -> Result<Self, BackendError> {
        Ok(Self {
            ep: Endpoint::new("image", cfg.image_url.clone(), None, cfg)?,
            cap: ImageCapability {
                name: "remote-image".into(),
                width: cfg.image_width,
                height: cfg.image_height,
                supports_layout_condition: true,
                supports_init_image: true,
            },
        })
    }

    pub fn with_exchange_log(mut self, log: ExchangeLog) -> Self {
        self.ep.log = Some(log);
        self
    }
}

fn encode_raster(r: &Raster) -> Result<String, BackendError> {
    r.to_png()
        .map(|png| B64.encode(png))
        .map_err(|e| BackendError::Unsupported(format!("raster encoding failed: {e}")))
}

impl ImageBackend for RemoteImage {
    fn capability(&self) -> &ImageCapability {
        &self.cap
    }

    fn generate(&self, req: &ImageRequest) -> Result<Raster, BackendError> {
        req.validate()?;
        let mut body = json!({
            "prompt": req.prompt,
            "width": req.width,
            "height": req.height,
            "seed": req.seed,
        });
        if let Some(c) = &req.layout_condition {
            body["control_image"] = json!(encode_raster(c)?);
        }
        if let Some(i) = &req.init_image {
            body["init_image"] = json!(encode_raster(i)?);
        }
        let v = self.ep.post(&body)?;
        let b64 = v
            .get("image")
            .or_else(|| v.pointer("/images/0"))
            .and_then(Value::as_str)
            .ok_or_else(|| self.ep.malformed("missing image"))?;
        let bytes = B64.decode(b64).map_err(|e| self.ep.malformed(format!("bad base64: {e}")))?;
        let raster = Raster::decode(&bytes).map_err(|e| self.ep.malformed(format!("bad image: {e}")))?;
        if (raster.width(), raster.height()) == (req.width, req.height) {
            return Ok(raster);
        }
        tracing::warn!(
            got_w = raster.width(),
            got_h = raster.height(),
            want_w = req.width,
            want_h = req.height,
            "image server returned other dimensions; resizing"
        );
        Ok(Raster::from_image(image::imageops::resize(
            raster.image(),
            req.width,
            req.height,
            image::imageops::FilterType::Triangle,
        )))
    }
}
