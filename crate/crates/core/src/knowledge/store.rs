use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{validate_svg, IconRecord, KbError, KnowledgeRecord};
use crate::backends::{EmbeddingBackend, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    Ui,
    Icon,
}

/// Something a knowledge store holds.
pub trait StoreRecord: Clone + Serialize + DeserializeOwned {
    const KIND: StoreKind;
    fn key(&self) -> &str;
    /// Text handed to the embedding backend.
    fn embed_text(&self) -> String;
    fn embedding(&self) -> Option<&[f64]>;
    fn set_embedding(&mut self, v: Vec<f64>);
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

impl StoreRecord for KnowledgeRecord {
    const KIND: StoreKind = StoreKind::Ui;

    fn key(&self) -> &str {
        &self.id
    }

    fn embed_text(&self) -> String {
        self.render()
    }

    fn embedding(&self) -> Option<&[f64]> {
        self.embedding.as_deref()
    }

    fn set_embedding(&mut self, v: Vec<f64>) {
        self.embedding = Some(v);
    }

    fn validate(&self) -> Result<(), String> {
        if self.composition.is_empty() {
            return Err("empty composition".into());
        }
        self.composition.iter().try_for_each(|c| c.bbox.validate())
    }
}

impl StoreRecord for IconRecord {
    const KIND: StoreKind = StoreKind::Icon;

    fn key(&self) -> &str {
        &self.name
    }

    fn embed_text(&self) -> String {
        self.description.clone()
    }

    fn embedding(&self) -> Option<&[f64]> {
        self.embedding.as_deref()
    }

    fn set_embedding(&mut self, v: Vec<f64>) {
        self.embedding = Some(v);
    }

    fn validate(&self) -> Result<(), String> {
        validate_svg(&self.svg)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    kind: StoreKind,
}

/// Records plus the embedding dimension shared by all of them. Persisted
/// as JSON lines behind a `{"dim", "kind"}` header; `dim` 0 means not yet
/// embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeStore<R> {
    dim: Option<usize>,
    records: Vec<R>,
}

pub type UiStore = KnowledgeStore<KnowledgeRecord>;
pub type IconStore = KnowledgeStore<IconRecord>;

impl<R: StoreRecord> KnowledgeStore<R> {
    /// Builds a store, checking embeddings agree on one dimension.
    pub fn new(records: Vec<R>) -> Result<Self, KbError> {
        let mut dim = None;
        for r in &records {
            r.validate().map_err(|message| KbError::InvalidRecord { id: r.key().to_string(), message })?;
            if let Some(e) = r.embedding() {
                match dim {
                    None => dim = Some(e.len()),
                    Some(d) if d != e.len() => return Err(KbError::DimensionMismatch { expected: d, got: e.len() }),
                    _ => {}
                }
            }
        }
        Ok(Self { dim, records })
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, key: &str) -> Option<&R> {
        self.records.iter().find(|r| r.key() == key)
    }

    pub fn is_fully_embedded(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.embedding().is_some())
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header { dim: self.dim.unwrap_or(0), kind: R::KIND };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self, KbError> {
        let corrupt = |line: usize, message: String| KbError::Corrupt { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| corrupt(1, "missing header".into()))?;
        let header: Header = serde_json::from_str(first).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
        if header.kind != R::KIND {
            return Err(corrupt(1, format!("expected a {:?} store, found {:?}", R::KIND, header.kind)));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let r: R = serde_json::from_str(line).map_err(|e| corrupt(i + 1, e.to_string()))?;
            if let Some(e) = r.embedding() {
                if e.len() != header.dim {
                    return Err(corrupt(i + 1, format!("embedding has {} entries, header says {}", e.len(), header.dim)));
                }
            }
            r.validate().map_err(|m| corrupt(i + 1, m))?;
            records.push(r);
        }
        Ok(Self { dim: (header.dim > 0).then_some(header.dim), records })
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        fs::write(path, self.to_jsonl()).map_err(|source| KbError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = fs::read_to_string(path).map_err(|source| KbError::Io { path: path.to_path_buf(), source })?;
        Self::from_jsonl(&text, path)
    }

    /// SHA-256 of the persisted form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedReport {
    pub embedded: usize,
    pub already_present: usize,
}

/// Embeds every record that has no embedding yet, in store order. On
/// failure the records embedded so far are kept, so a later call resumes
/// where this one stopped.
pub fn embed_records<R: StoreRecord>(
    store: &mut KnowledgeStore<R>,
    backend: &dyn EmbeddingBackend,
    retry: RetryPolicy,
) -> Result<EmbedReport, KbError> {
    if store.records.is_empty() {
        return Err(KbError::Empty);
    }
    let dim = backend.capability().dim;
    if let Some(d) = store.dim {
        if d != dim {
            return Err(KbError::DimensionMismatch { expected: d, got: dim });
        }
    }
    let mut report = EmbedReport { embedded: 0, already_present: 0 };
    let mut last_embedded: Option<String> = None;
    for rec in store.records.iter_mut() {
        if rec.embedding().is_some() {
            report.already_present += 1;
            last_embedded = Some(rec.key().to_string());
            continue;
        }
        let text = rec.embed_text();
        let v = retry
            .run(|| backend.embed(&text))
            .map_err(|source| KbError::PartialEmbedding { last_embedded: last_embedded.clone(), source })?;
        if v.len() != dim {
            return Err(KbError::DimensionMismatch { expected: dim, got: v.len() });
        }
        rec.set_embedding(v);
        store.dim = Some(dim);
        report.embedded += 1;
        last_embedded = Some(rec.key().to_string());
    }
    Ok(report)
}
