//! `maxproto.toml`: defaults for every subcommand. Command-line flags win.
//!
//! ```toml
//! backend = "mock"          # or "remote"
//! seed = 7
//! kb = "stores/ui.jsonl"    # relative paths resolve against this file
//! icons = "stores/icons.jsonl"
//! templates = "templates.toml"
//!
//! [engine]                  # retrieval_k, cache_char_budget, image_width, image_height
//! [render]                  # out_w, out_h, embed_rasters, show_ids
//! [remote]                  # chat_url, chat_model, embed_url, embed_model, embed_dim, image_url, ...
//! [serve]                   # addr, snapshot_dir, session_ttl_hours
//! ```
//!
//! API keys are only read from the environment.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use maxproto_core::agents::EngineConfig;
use maxproto_core::backends::{RemoteConfig, RetryPolicy};
use maxproto_core::render::RenderOptions;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_CONFIG_FILE: &str = "maxproto.toml";
pub const DEFAULT_OUT_W: u32 = 360;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    pub out_w: Option<u32>,
    pub out_h: Option<u32>,
    pub embed_rasters: Option<bool>,
    pub show_ids: Option<bool>,
}

impl RenderSection {
    /// Options for a canvas; without an explicit `out_h` the height follows
    /// the canvas aspect ratio.
    pub fn options_for(&self, canvas_w: u32, canvas_h: u32) -> RenderOptions {
        let o = self.options();
        if self.out_h.is_some() {
            o
        } else {
            o.fit_canvas(canvas_w, canvas_h)
        }
    }

    pub fn options(&self) -> RenderOptions {
        let d = RenderOptions::default();
        RenderOptions {
            out_w: self.out_w.unwrap_or(DEFAULT_OUT_W),
            out_h: self.out_h.unwrap_or(d.out_h),
            embed_rasters: self.embed_rasters.unwrap_or(d.embed_rasters),
            show_ids: self.show_ids.unwrap_or(d.show_ids),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSection {
    pub chat_url: Option<String>,
    pub chat_model: Option<String>,
    pub chat_max_input_chars: Option<usize>,
    pub embed_url: Option<String>,
    pub embed_model: Option<String>,
    pub embed_dim: Option<usize>,
    pub image_url: Option<String>,
    pub image_width: Option<u32>,
    pub image_height: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
}

impl RemoteSection {
    /// Environment settings overlaid with this section.
    pub fn config(&self) -> RemoteConfig {
        let mut c = RemoteConfig::from_env();
        if let Some(v) = &self.chat_url {
            c.chat_url = Some(v.clone());
        }
        if let Some(v) = &self.embed_url {
            c.embed_url = Some(v.clone());
        }
        if let Some(v) = &self.image_url {
            c.image_url = Some(v.clone());
        }
        if let Some(v) = &self.chat_model {
            c.chat_model = v.clone();
        }
        if let Some(v) = &self.embed_model {
            c.embed_model = v.clone();
        }
        c.chat_max_input_chars = self.chat_max_input_chars.unwrap_or(c.chat_max_input_chars);
        c.embed_dim = self.embed_dim.unwrap_or(c.embed_dim);
        c.image_width = self.image_width.unwrap_or(c.image_width);
        c.image_height = self.image_height.unwrap_or(c.image_height);
        c.max_in_flight = self.max_in_flight.unwrap_or(c.max_in_flight);
        if let Some(s) = self.timeout_secs {
            c.timeout = Duration::from_secs(s);
        }
        if let Some(n) = self.retries {
            c.retry = RetryPolicy { attempts: n, ..c.retry };
        }
        c
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub addr: Option<String>,
    pub snapshot_dir: Option<PathBuf>,
    pub session_ttl_hours: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub seed: Option<u64>,
    pub kb: Option<PathBuf>,
    pub icons: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub remote: RemoteSection,
    #[serde(default)]
    pub serve: ServeSection,
}

impl FileConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let mut c: FileConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        for p in [&mut c.kb, &mut c.icons, &mut c.templates, &mut c.serve.snapshot_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    /// Reads `explicit` if given (it must exist), else `./maxproto.toml`
    /// when present, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, CliError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !p.is_file() {
                    return Ok(Self::default());
                }
                p
            }
        };
        let text = fs::read_to_string(&path).map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let c = FileConfig::parse(
            "backend = \"remote\"\nkb = \"s/ui.jsonl\"\nicons = \"/abs/icons.jsonl\"\n[serve]\nsnapshot_dir = \"snaps\"\n",
            Path::new("/etc/mp"),
        )
        .unwrap();
        assert_eq!(c.backend, Some(BackendKind::Remote));
        assert_eq!(c.kb.unwrap(), Path::new("/etc/mp/s/ui.jsonl"));
        assert_eq!(c.icons.unwrap(), Path::new("/abs/icons.jsonl"));
        assert_eq!(c.serve.snapshot_dir.unwrap(), Path::new("/etc/mp/snaps"));
    }

    #[test]
    fn sections_fill_defaults() {
        let c = FileConfig::parse("[engine]\nretrieval_k = 3\n[render]\nout_w = 300\n", Path::new(".")).unwrap();
        assert_eq!(c.engine, EngineConfig { retrieval_k: 3, ..EngineConfig::default() });
        assert_eq!(c.render.options(), RenderOptions { out_w: 300, ..RenderOptions::default() });
        assert_eq!(c.render.options_for(1000, 2000).out_h, 600);
        let fixed = FileConfig::parse("[render]\nout_h = 50\n", Path::new(".")).unwrap();
        assert_eq!(fixed.render.options_for(1000, 2000), RenderOptions { out_w: DEFAULT_OUT_W, out_h: 50, ..RenderOptions::default() });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("bakend = \"mock\"", Path::new(".")).is_err());
        assert!(FileConfig::parse("[render]\nwidth = 3", Path::new(".")).is_err());
    }

    #[test]
    fn remote_section_overrides() {
        let s = RemoteSection { chat_url: Some("http://c".into()), embed_dim: Some(8), retries: Some(5), ..Default::default() };
        let c = s.config();
        assert_eq!(c.chat_url.as_deref(), Some("http://c"));
        assert_eq!((c.embed_dim, c.retry.attempts), (8, 5));
    }
}
