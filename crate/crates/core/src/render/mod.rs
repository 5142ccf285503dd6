//! SVG export and the structured `prototype.json` document.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

mod document;
mod svg;

pub use document::{parse_document, render_document, DocumentError, DOCUMENT_FORMAT};
pub use svg::render_svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub out_w: u32,
    pub out_h: u32,
    /// Inline rasters as base64 data; otherwise reference sidecar PNGs.
    pub embed_rasters: bool,
    /// Overlay component ids for debugging.
    pub show_ids: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { out_w: 512, out_h: 512, embed_rasters: true, show_ids: false }
    }
}

impl RenderOptions {
    /// Keeps `out_w` and sets `out_h` to match the canvas aspect ratio.
    pub fn fit_canvas(self, canvas_w: u32, canvas_h: u32) -> Self {
        let h = (u64::from(self.out_w) * u64::from(canvas_h) + u64::from(canvas_w) / 2) / u64::from(canvas_w.max(1));
        Self { out_h: u32::try_from(h).unwrap_or(u32::MAX).max(1), ..self }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.out_w == 0 || self.out_h == 0 {
            return Err(RenderError::Options("output dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_canvas_keeps_aspect() {
        let o = RenderOptions { out_w: 360, ..RenderOptions::default() };
        assert_eq!(o.fit_canvas(1440, 2560).out_h, 640);
        assert_eq!(o.fit_canvas(1000, 1000).out_h, 360);
        assert_eq!(RenderOptions { out_w: 1, ..o }.fit_canvas(1000, 10).out_h, 1);
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("raster encoding failed: {0}")]
    Encode(#[from] image::ImageError),
    #[error("invalid render options: {0}")]
    Options(String),
    #[error("icon {icon:?} has malformed svg: {message}")]
    Icon { icon: String, message: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// A PNG written next to the main document, at a path relative to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sidecar {
    pub path: String,
    pub bytes: Vec<u8>,
}

/// A rendered text document plus the sidecar files it references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub sidecars: Vec<Sidecar>,
}

impl Rendered {
    /// Writes `text` to `dir/name` and every sidecar under `dir`.
    pub fn write_to(&self, dir: &Path, name: &str) -> Result<(), RenderError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| RenderError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for s in &self.sidecars {
            let p = dir.join(&s.path);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::write(&p, &s.bytes).map_err(io(&p))?;
        }
        let p = dir.join(name);
        fs::write(&p, &self.text).map_err(io(&p))
    }
}

pub fn theme_sidecar_path() -> String {
    "rasters/theme.png".to_string()
}

pub fn component_sidecar_path(idx: usize) -> String {
    format!("rasters/component-{idx}.png")
}
