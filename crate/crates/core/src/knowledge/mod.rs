//! UI and icon knowledge bases: ingestion, persistence, embedding and exact
//! top-k cosine retrieval.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;
use crate::model::BBox;

mod captioner;
mod ingest;
mod retrieval;
mod store;

pub use captioner::{CaptionerQuestions, CAPTIONER_QUESTIONS_TOML};
pub use ingest::{ingest_icons, ingest_icon_values, ingest_ui_records, ingest_ui_values, IngestReport, SkippedRecord, SourceLine};
pub use retrieval::{cosine_similarity, lookup_icon, retrieve, RetrievalConfig, RetrievedReference, SimilarityError};
pub use store::{embed_records, EmbedReport, IconStore, KnowledgeStore, StoreKind, StoreRecord, UiStore};

/// Theme attributes answered by an external captioner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThemeAttrs {
    pub theme_color: String,
    pub primary_color: String,
    pub theme_description: String,
    pub app_category: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticKnowledge {
    pub content_descriptions: Vec<String>,
    pub high_level: String,
    pub theme_attrs: ThemeAttrs,
}

/// Component type name as found in the source data (not restricted to the
/// engine's 13 kinds) with its normalized box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionEntry {
    #[serde(rename = "type")]
    pub ctype: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub id: String,
    pub composition: Vec<CompositionEntry>,
    pub semantic: SemanticKnowledge,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl KnowledgeRecord {
    /// Canonical text fed to the embedder and injected into prompts.
    pub fn render(&self) -> String {
        let mut lines: Vec<String> = self.composition.iter().map(|c| format!("{} {}", c.ctype, c.bbox)).collect();
        let s = &self.semantic;
        lines.push(format!("CONTENT: {}", s.content_descriptions.join("; ")));
        lines.push(format!("SUMMARY: {}", s.high_level));
        let t = &s.theme_attrs;
        lines.push(format!(
            "THEME: theme_color={}; primary_color={}; description={}; category={}",
            t.theme_color, t.primary_color, t.theme_description, t.app_category
        ));
        lines.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconRecord {
    pub name: String,
    pub svg: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("knowledge base is empty")]
    Empty,
    #[error("store {path}: line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("embedding dimension mismatch: store has {expected}, backend produced {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("record {0:?} has no embedding; embed the store first")]
    NotEmbedded(String),
    #[error("embedding interrupted after {last_embedded:?}: {source}")]
    PartialEmbedding { last_embedded: Option<String>, source: BackendError },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("invalid record {id:?}: {message}")]
    InvalidRecord { id: String, message: String },
}

/// Checks that `svg` is well-formed markup with a single root element.
pub fn validate_svg(svg: &str) -> Result<(), String> {
    roxmltree::Document::parse(svg).map(|_| ()).map_err(|e| e.to_string())
}
