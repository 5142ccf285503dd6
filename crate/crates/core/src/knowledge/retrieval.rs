use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IconRecord, IconStore, KbError, StoreRecord, UiStore};
use crate::backends::EmbeddingBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
}

/// `dot(a, b) / (|a| |b|)`, accumulated in f64.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x, y);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedReference {
    pub record_id: String,
    pub score: f64,
    pub rendered: String,
}

/// Descending score, then ascending key.
fn rank<'a, R: StoreRecord>(records: &'a [R], query: &[f64]) -> Result<Vec<(f64, &'a R)>, KbError> {
    let mut scored = records
        .iter()
        .map(|r| {
            let e = r.embedding().ok_or_else(|| KbError::NotEmbedded(r.key().to_string()))?;
            Ok((cosine_similarity(query, e)?, r))
        })
        .collect::<Result<Vec<_>, KbError>>()?;
    scored.sort_by(|(sa, ra), (sb, rb)| sb.total_cmp(sa).then_with(|| ra.key().cmp(rb.key())));
    Ok(scored)
}

fn embed_query(backend: &dyn EmbeddingBackend, text: &str, dim: Option<usize>) -> Result<Vec<f64>, KbError> {
    let q = backend.embed(text)?;
    if let Some(d) = dim {
        if q.len() != d {
            return Err(KbError::DimensionMismatch { expected: d, got: q.len() });
        }
    }
    Ok(q)
}

/// Exact top-k scan. Issues exactly one embedding call.
pub fn retrieve(
    store: &UiStore,
    query_text: &str,
    backend: &dyn EmbeddingBackend,
    cfg: RetrievalConfig,
) -> Result<Vec<RetrievedReference>, KbError> {
    if store.is_empty() {
        return Err(KbError::Empty);
    }
    let q = embed_query(backend, query_text, store.dim())?;
    Ok(rank(store.records(), &q)?
        .into_iter()
        .take(cfg.k.max(1))
        .map(|(score, r)| RetrievedReference { record_id: r.id.clone(), score, rendered: r.render() })
        .collect())
}

/// Icon whose description embedding is closest to the phrase.
pub fn lookup_icon<'a>(store: &'a IconStore, phrase: &str, backend: &dyn EmbeddingBackend) -> Result<&'a IconRecord, KbError> {
    if store.is_empty() {
        return Err(KbError::Empty);
    }
    let q = embed_query(backend, phrase, store.dim())?;
    Ok(rank(store.records(), &q)?.first().map(|(_, r)| *r).expect("non-empty store"))
}
