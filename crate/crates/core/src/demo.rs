//! Small bundled dataset: a dozen annotated UI screens, ten icons and a
//! product-page wireframe. Used by the CLI `--demo` mode and by tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::agents::{Engine, EngineConfig, Templates};
use crate::backends::{Backends, EmbeddingBackend, RetryPolicy};
use crate::knowledge::{embed_records, ingest_icon_values, ingest_ui_values, IconStore, KbError, SourceLine, ThemeAttrs, UiStore};
use crate::model::{parse_wireframe, Wireframe};

pub const UI_JSONL: &str = include_str!("../data/demo/ui.jsonl");
pub const CAPTIONS_JSON: &str = include_str!("../data/demo/captions.json");
pub const ICONS_JSONL: &str = include_str!("../data/demo/icons.jsonl");
pub const WIREFRAME_JSON: &str = include_str!("../data/demo/wireframe.json");
pub const PROMPT: &str = "A product page for a sneaker shop with a big photo and a buy button";

fn lines(origin: &str, text: &str) -> Vec<SourceLine> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (format!("{origin}:{}", i + 1), serde_json::from_str(l).map_err(|e| e.to_string())))
        .collect()
}

/// Unembedded UI store.
pub fn raw_ui_store() -> UiStore {
    let captions: BTreeMap<String, ThemeAttrs> = serde_json::from_str(CAPTIONS_JSON).expect("demo captions parse");
    ingest_ui_values(lines("ui.jsonl", UI_JSONL), Some(&captions)).expect("demo ui data is valid").0
}

pub fn raw_icon_store() -> IconStore {
    ingest_icon_values(lines("icons.jsonl", ICONS_JSONL)).expect("demo icons are valid").0
}

pub fn ui_store(embedder: &dyn EmbeddingBackend) -> Result<UiStore, KbError> {
    let mut s = raw_ui_store();
    embed_records(&mut s, embedder, RetryPolicy::default())?;
    Ok(s)
}

pub fn icon_store(embedder: &dyn EmbeddingBackend) -> Result<IconStore, KbError> {
    let mut s = raw_icon_store();
    embed_records(&mut s, embedder, RetryPolicy::default())?;
    Ok(s)
}

pub fn wireframe() -> Wireframe {
    parse_wireframe(WIREFRAME_JSON).expect("demo wireframe is valid")
}

/// Engine over the demo stores with the given backends.
pub fn engine_with(backends: Backends) -> Engine {
    let ui = ui_store(backends.embedder.as_ref()).expect("demo ui store embeds");
    let icons = icon_store(backends.embedder.as_ref()).expect("demo icon store embeds");
    Engine::new(backends, Arc::new(ui), Arc::new(icons), Templates::default(), EngineConfig::default())
        .expect("demo engine is valid")
}

/// Engine over the demo stores with the deterministic mock backends.
pub fn mock_engine() -> Engine {
    engine_with(Backends::mock())
}
