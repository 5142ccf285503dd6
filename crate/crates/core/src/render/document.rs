//! `prototype.json`: a lossless encoding of a [`Prototype`].
//!
//! ```text
//! { "format": "maxproto.prototype/v1",
//!   "theme": {theme_color, primary_color, app_category, narrative, component_hints},
//!   "theme_image": RasterRef,
//!   "results": [{component_id, type, bbox, payload: {kind, ...}}],
//!   "provenance": {session, master_seed, theme, components} }
//! ```
//!
//! A `RasterRef` is `{"encoding": "png-base64", "data": ...}` or, in
//! sidecar mode, `{"encoding": "png-file", "path": "rasters/..."}` with
//! the path relative to the document.

use std::fs;
use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{component_sidecar_path, theme_sidecar_path, RenderError, Rendered, Sidecar};
use crate::agents::ThemeDescription;
use crate::model::{BBox, ComponentResult, ComponentType, Payload, Provenance, Prototype, Raster};

pub const DOCUMENT_FORMAT: &str = "maxproto.prototype/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "kebab-case")]
enum RasterRef {
    PngBase64 { data: String },
    PngFile { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PayloadDoc {
    Text { text: String, truncated: bool },
    Image { raster: RasterRef, prompt: String },
    Icon { phrase: String, icon_name: String, svg: String },
    Color { hex: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ResultDoc {
    component_id: String,
    #[serde(rename = "type")]
    ctype: ComponentType,
    bbox: BBox,
    payload: PayloadDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PrototypeDoc {
    format: String,
    theme: ThemeDescription,
    theme_image: RasterRef,
    results: Vec<ResultDoc>,
    provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed prototype document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported document format {0:?}")]
    Format(String),
    #[error("bad raster data: {0}")]
    Raster(String),
    #[error("cannot read sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
}

fn raster_ref(raster: &Raster, embed: bool, path: String, sidecars: &mut Vec<Sidecar>) -> Result<RasterRef, RenderError> {
    let png = raster.to_png()?;
    Ok(if embed {
        RasterRef::PngBase64 { data: base64::engine::general_purpose::STANDARD.encode(&png) }
    } else {
        sidecars.push(Sidecar { path: path.clone(), bytes: png });
        RasterRef::PngFile { path }
    })
}

/// Serializes `proto`. With `embed_rasters` false the rasters are returned
/// as sidecars and referenced by relative path.
pub fn render_document(proto: &Prototype, embed_rasters: bool) -> Result<Rendered, RenderError> {
    let mut sidecars = Vec::new();
    let theme_image = raster_ref(&proto.theme_image, embed_rasters, theme_sidecar_path(), &mut sidecars)?;
    let mut results = Vec::with_capacity(proto.results.len());
    for (i, r) in proto.results.iter().enumerate() {
        let payload = match &r.payload {
            Payload::Text { text, truncated } => PayloadDoc::Text { text: text.clone(), truncated: *truncated },
            Payload::Image { raster, prompt } => PayloadDoc::Image {
                raster: raster_ref(raster, embed_rasters, component_sidecar_path(i), &mut sidecars)?,
                prompt: prompt.clone(),
            },
            Payload::Icon { phrase, icon_name, svg } => {
                PayloadDoc::Icon { phrase: phrase.clone(), icon_name: icon_name.clone(), svg: svg.clone() }
            }
            Payload::Color { hex } => PayloadDoc::Color { hex: hex.clone() },
        };
        results.push(ResultDoc { component_id: r.component_id.clone(), ctype: r.ctype, bbox: r.bbox, payload });
    }
    let doc = PrototypeDoc {
        format: DOCUMENT_FORMAT.to_string(),
        theme: proto.theme.clone(),
        theme_image,
        results,
        provenance: proto.provenance.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("prototype document serializes");
    text.push('\n');
    Ok(Rendered { text, sidecars })
}

fn load_raster(r: RasterRef, base_dir: Option<&Path>) -> Result<Raster, DocumentError> {
    let bytes = match r {
        RasterRef::PngBase64 { data } => base64::engine::general_purpose::STANDARD
            .decode(data.as_bytes())
            .map_err(|e| DocumentError::Raster(e.to_string()))?,
        RasterRef::PngFile { path } => {
            let full = match base_dir {
                Some(d) => d.join(&path),
                None => Path::new(&path).to_path_buf(),
            };
            fs::read(&full).map_err(|e| DocumentError::Sidecar { path: path.clone(), message: e.to_string() })?
        }
    };
    Raster::decode(&bytes).map_err(|e| DocumentError::Raster(e.to_string()))
}

/// Parses a document written by [`render_document`]. Sidecar paths are
/// resolved against `base_dir`.
pub fn parse_document(text: &str, base_dir: Option<&Path>) -> Result<Prototype, DocumentError> {
    let doc: PrototypeDoc = serde_json::from_str(text)?;
    if doc.format != DOCUMENT_FORMAT {
        return Err(DocumentError::Format(doc.format));
    }
    let results = doc
        .results
        .into_iter()
        .map(|r| {
            let payload = match r.payload {
                PayloadDoc::Text { text, truncated } => Payload::Text { text, truncated },
                PayloadDoc::Image { raster, prompt } => Payload::Image { raster: load_raster(raster, base_dir)?, prompt },
                PayloadDoc::Icon { phrase, icon_name, svg } => Payload::Icon { phrase, icon_name, svg },
                PayloadDoc::Color { hex } => Payload::Color { hex },
            };
            Ok(ComponentResult { component_id: r.component_id, ctype: r.ctype, bbox: r.bbox, payload })
        })
        .collect::<Result<Vec<_>, DocumentError>>()?;
    Ok(Prototype {
        theme: doc.theme,
        theme_image: load_raster(doc.theme_image, base_dir)?,
        results,
        provenance: doc.provenance,
    })
}

