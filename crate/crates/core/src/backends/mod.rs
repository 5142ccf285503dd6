//! Model-backend contracts (chat completion, text embedding, layout-conditioned
//! image generation), deterministic mocks and HTTP adapters.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use image::Rgb;
use thiserror::Error;

use crate::model::{scale_bbox_to_pixels, Raster, Wireframe};

pub mod mock;
pub mod remote;

pub use mock::{MockChat, MockEmbedding, MockImage};
pub use remote::{Exchange, ExchangeLog, RemoteChat, RemoteConfig, RemoteEmbedding, RemoteImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatCapability {
    pub name: String,
    pub max_input_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingCapability {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageCapability {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub supports_layout_condition: bool,
    pub supports_init_image: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("authentication rejected by {provider}: {message}")]
    Authentication { provider: String, message: String },
    #[error("rate limited by {provider}: {message}")]
    RateLimited { provider: String, message: String },
    #[error("request to {provider} timed out")]
    Timeout { provider: String },
    #[error("{provider} returned status {status}: {message}")]
    Status { provider: String, status: u16, message: String },
    #[error("transport error talking to {provider}: {message}")]
    Transport { provider: String, message: String },
    #[error("malformed response from {provider}: {message}")]
    Malformed { provider: String, message: String },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("backend failure: {0}")]
    Failed(String),
}

impl BackendError {
    /// Transient failures are worth retrying; everything else surfaces
    /// immediately.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::RateLimited { .. } | BackendError::Timeout { .. } | BackendError::Transport { .. } => true,
            BackendError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn capability(&self) -> &ChatCapability;
    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn capability(&self) -> &EmbeddingCapability;
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
}

pub trait ImageBackend: Send + Sync {
    fn capability(&self) -> &ImageCapability;
    fn generate(&self, req: &ImageRequest) -> Result<Raster, BackendError>;
}

/// Image generation call. The theme path sets `layout_condition`, the
/// component path sets `init_image`; never both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRequest {
    pub prompt: String,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub layout_condition: Option<Raster>,
    pub init_image: Option<Raster>,
}

impl ImageRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.width == 0 || self.height == 0 {
            return Err(BackendError::Unsupported("image dimensions must be positive".into()));
        }
        if self.layout_condition.is_some() && self.init_image.is_some() {
            return Err(BackendError::Unsupported(
                "layout condition and init image are mutually exclusive".into(),
            ));
        }
        Ok(())
    }
}

/// Black-on-white 1px outline raster of the wireframe at `width` x `height`.
pub fn render_layout_condition(wf: &Wireframe, width: u32, height: u32) -> Raster {
    let mut img = Raster::filled(width, height, [255, 255, 255]).into_image();
    let black = Rgb([0, 0, 0]);
    for c in &wf.components {
        let r = scale_bbox_to_pixels(c.bbox, width, height);
        let (x1, y1) = (r.x + r.w - 1, r.y + r.h - 1);
        for x in r.x..=x1 {
            img.put_pixel(x, r.y, black);
            img.put_pixel(x, y1, black);
        }
        for y in r.y..=y1 {
            img.put_pixel(r.x, y, black);
            img.put_pixel(x1, y, black);
        }
    }
    Raster::from_image(img)
}

/// Bounded retry with exponential backoff; only transient errors are retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_millis(250) }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self { attempts, base_delay: Duration::ZERO }
    }

    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let attempts = self.attempts.max(1);
        let mut delay = self.base_delay;
        for attempt in 1..=attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < attempts => {
                    tracing::warn!(attempt, error = %e, "transient backend error, retrying");
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    delay *= 2;
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("loop returns on the final attempt")
    }
}

/// The three backends one engine talks to.
#[derive(Clone)]
pub struct Backends {
    pub chat: Arc<dyn ChatBackend>,
    pub embedder: Arc<dyn EmbeddingBackend>,
    pub image: Arc<dyn ImageBackend>,
}

impl Backends {
    pub fn mock() -> Self {
        Self {
            chat: Arc::new(MockChat::new()),
            embedder: Arc::new(MockEmbedding::new()),
            image: Arc::new(MockImage::new()),
        }
    }
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends")
            .field("chat", &self.chat.capability().name)
            .field("embedder", &self.embedder.capability().name)
            .field("image", &self.image.capability().name)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, ComponentType, WireframeComponent};
    use std::cell::Cell;

    #[test]
    fn retry_stops_on_non_transient() {
        let calls = Cell::new(0);
        let err = RetryPolicy::immediate(3)
            .run::<()>(|| {
                calls.set(calls.get() + 1);
                Err(BackendError::Authentication { provider: "p".into(), message: "no".into() })
            })
            .unwrap_err();
        assert!(matches!(err, BackendError::Authentication { .. }));
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn retry_recovers_from_transient() {
        let calls = Cell::new(0);
        let v = RetryPolicy::immediate(3)
            .run(|| {
                calls.set(calls.get() + 1);
                if calls.get() < 2 {
                    Err(BackendError::RateLimited { provider: "p".into(), message: "slow".into() })
                } else {
                    Ok(5)
                }
            })
            .unwrap();
        assert_eq!((v, calls.get()), (5, 2));
    }

    #[test]
    fn retry_is_bounded() {
        let calls = Cell::new(0);
        RetryPolicy::immediate(3)
            .run::<()>(|| {
                calls.set(calls.get() + 1);
                Err(BackendError::Timeout { provider: "p".into() })
            })
            .unwrap_err();
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn layout_condition_outlines_boxes() {
        let wf = Wireframe {
            canvas_w: 100,
            canvas_h: 100,
            components: vec![WireframeComponent {
                id: "a".into(),
                ctype: ComponentType::Card,
                bbox: BBox { x: 250, y: 250, w: 500, h: 500 },
                user_hint: None,
            }],
        };
        let r = render_layout_condition(&wf, 100, 100);
        let img = r.image();
        assert_eq!(img.get_pixel(25, 25).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(74, 50).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(50, 50).0, [255, 255, 255]);
        assert_eq!(img.get_pixel(5, 5).0, [255, 255, 255]);
    }
}
