//! Request and response bodies.

use chrono::{DateTime, Utc};
use maxproto_core::agents::{Handler, ThemeDescription};
use maxproto_core::model::{BBox, ComponentProvenance, ComponentResult, ComponentType, PayloadKind, Prototype};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::session::SessionData;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionBody {
    pub prompt: Option<String>,
    pub wireframe: Option<Value>,
    pub seed: Option<u64>,
}

/// Manual replacement of one component's content.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PayloadEdit {
    Text { text: String },
    /// Base64 PNG or JPEG.
    Image {
        image_base64: String,
        #[serde(default)]
        prompt: Option<String>,
    },
    /// Icon from the icon store, by name.
    Icon {
        icon_name: String,
        #[serde(default)]
        phrase: Option<String>,
    },
    Color { hex: String },
}

impl PayloadEdit {
    pub fn kind(&self) -> PayloadKind {
        match self {
            PayloadEdit::Text { .. } => PayloadKind::Text,
            PayloadEdit::Image { .. } => PayloadKind::Image,
            PayloadEdit::Icon { .. } => PayloadKind::Icon,
            PayloadEdit::Color { .. } => PayloadKind::Color,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegenerateBody {
    #[serde(rename = "override")]
    pub user_override: Option<String>,
    pub payload: Option<PayloadEdit>,
    /// Seed attempt; defaults to the component's previous attempt + 1.
    pub attempt: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceDigest {
    pub backend: String,
    pub seed: u64,
    pub attempt: u32,
    /// Hex SHA-256 of the logged composed prompt.
    pub prompt_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component_id: String,
    #[serde(rename = "type")]
    pub ctype: ComponentType,
    pub bbox: BBox,
    pub handler: Handler,
    pub payload_kind: PayloadKind,
    pub summary: String,
    pub provenance: ProvenanceDigest,
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

impl ComponentSummary {
    pub fn new(result: &ComponentResult, prov: &ComponentProvenance) -> Self {
        Self {
            component_id: result.component_id.clone(),
            ctype: result.ctype,
            bbox: result.bbox,
            handler: prov.handler,
            payload_kind: result.payload.kind(),
            summary: result.payload.summary(),
            provenance: ProvenanceDigest {
                backend: prov.backend.clone(),
                seed: prov.seed,
                attempt: prov.attempt,
                prompt_sha256: prompt_digest(&prov.prompt),
            },
        }
    }

    pub fn all(proto: &Prototype) -> Vec<Self> {
        proto.results.iter().zip(&proto.provenance.components).map(|(r, p)| Self::new(r, p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub revision: u64,
    pub theme: ThemeDescription,
    /// UI-store record ids that went into the theme prompt.
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub revision: u64,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub prompt: String,
    pub seed: Option<u64>,
    pub wireframe: Value,
    pub theme: ThemeDescription,
    pub generated: bool,
    pub components: Vec<ComponentSummary>,
}

impl SessionView {
    pub fn new(s: &SessionData) -> Self {
        Self {
            session_id: s.id.clone(),
            revision: s.revision,
            created_at: s.created_at,
            updated_at: s.updated_at,
            prompt: s.request.prompt.clone(),
            seed: s.request.seed,
            wireframe: s.request.wireframe.to_document(),
            theme: s.theme.theme.clone(),
            generated: s.prototype.is_some(),
            components: s.prototype.as_ref().map(ComponentSummary::all).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub session_id: String,
    pub revision: u64,
    /// Components carried over from an earlier failed pass.
    pub resumed: usize,
    pub components: Vec<ComponentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regenerated {
    pub session_id: String,
    pub revision: u64,
    pub component: ComponentSummary,
}
