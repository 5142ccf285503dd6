use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use maxproto_core::agents::Engine;
use maxproto_core::demo;
use maxproto_core::model::{parse_wireframe, GenerationRequest, Prototype, RequestError};
use maxproto_core::render::{render_document, render_svg, RenderOptions};

use crate::config::FileConfig;
use crate::{build_backends, build_engine, BackendArgs, CliError};

pub const SVG_FILE: &str = "prototype.svg";
pub const JSON_FILE: &str = "prototype.json";
pub const LOG_FILE: &str = "provenance.log";

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub prompt: Option<String>,
    /// Wireframe document (JSON).
    #[arg(long)]
    pub wireframe: Option<PathBuf>,
    /// UI store.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Icon store.
    #[arg(long)]
    pub icons: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Use the bundled demo data for any of prompt, wireframe and stores not given.
    #[arg(long)]
    pub demo: bool,
    /// Write rasters as PNG files next to the outputs instead of inlining them.
    #[arg(long)]
    pub sidecars: bool,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::input(format!("{flag} is required (or pass --demo)")))
}

pub fn run(a: GenerateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let backends = build_backends(a.backend.backend.or(cfg.backend).unwrap_or_default(), cfg)?;
    let kb = a.kb.clone().or_else(|| cfg.kb.clone());
    let icons = a.icons.clone().or_else(|| cfg.icons.clone());
    let engine = match (kb, icons) {
        (Some(kb), Some(icons)) => build_engine(backends, &kb, &icons, cfg)?,
        (kb, icons) if a.demo => demo_engine(backends, kb.as_deref(), icons.as_deref(), cfg)?,
        (None, _) => return required(None, "--kb"),
        (_, None) => return required(None, "--icons"),
    };

    let wireframe = match &a.wireframe {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read wireframe {}: {e}", path.display())))?;
            parse_wireframe(&text).map_err(|e| CliError::input(format!("wireframe {}: {e}", path.display())))?
        }
        None if a.demo => demo::wireframe(),
        None => required(None, "--wireframe")?,
    };
    let prompt = match a.prompt {
        Some(p) => p,
        None if a.demo => demo::PROMPT.to_string(),
        None => required(None, "--prompt")?,
    };
    let req = GenerationRequest::new(prompt, wireframe, a.seed.or(cfg.seed))
        .map_err(|e: RequestError| CliError::input(e.to_string()))?;

    let proto = engine.orchestrate(&req).map_err(CliError::orchestration)?;
    let mut opts = cfg.render.options_for(req.wireframe.canvas_w, req.wireframe.canvas_h);
    if a.sidecars {
        opts.embed_rasters = false;
    }
    write_outputs(&proto, &a.out, &opts)?;
    println!(
        "wrote {} components to {} ({SVG_FILE}, {JSON_FILE}, {LOG_FILE})",
        proto.results.len(),
        a.out.display()
    );
    Ok(())
}

/// Demo stores for whichever of `kb` / `icons` is missing.
fn demo_engine(
    backends: maxproto_core::backends::Backends,
    kb: Option<&Path>,
    icons: Option<&Path>,
    cfg: &FileConfig,
) -> Result<Engine, CliError> {
    let embedder = backends.embedder.clone();
    let ui = match kb {
        Some(p) => crate::load_store(p, &backends)?,
        None => demo::ui_store(embedder.as_ref()).map_err(CliError::kb)?,
    };
    let ic = match icons {
        Some(p) => crate::load_store(p, &backends)?,
        None => demo::icon_store(embedder.as_ref()).map_err(CliError::kb)?,
    };
    crate::assemble(backends, ui, ic, cfg)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::input(format!("cannot write {}: {e}", path.display()))
}

pub fn write_outputs(proto: &Prototype, out: &Path, opts: &RenderOptions) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io(out))?;
    let render_err = |e: maxproto_core::render::RenderError| CliError::Generation(format!("rendering failed: {e}"));
    render_svg(proto, opts).map_err(render_err)?.write_to(out, SVG_FILE).map_err(render_err)?;
    render_document(proto, opts.embed_rasters).map_err(render_err)?.write_to(out, JSON_FILE).map_err(render_err)?;
    let log = out.join(LOG_FILE);
    fs::write(&log, provenance_log(proto)).map_err(io(&log))
}

fn block(out: &mut String, title: &str, body: &str) {
    let _ = writeln!(out, "--- {title} ---\n{body}");
}

/// Plain-text provenance: every composed prompt, backend and seed, in
/// wireframe order.
pub fn provenance_log(proto: &Prototype) -> String {
    let p = &proto.provenance;
    let mut out = String::new();
    let _ = writeln!(out, "session: {}", p.session.as_deref().unwrap_or("-"));
    let _ = writeln!(out, "master_seed: {}", p.master_seed);
    let _ = writeln!(out, "\n=== theme ===");
    let _ = writeln!(out, "chat_backend: {}", p.theme.chat_backend);
    let _ = writeln!(out, "image_backend: {}", p.theme.image_backend);
    let _ = writeln!(out, "seed: {}", p.theme.seed);
    let _ = writeln!(out, "references: {}", p.theme.references.join(", "));
    let _ = writeln!(out, "summary: {}", proto.theme.summary());
    block(&mut out, "prompt", &p.theme.prompt);
    if let Some(r) = &p.theme.repair_prompt {
        block(&mut out, "repair prompt", r);
    }
    block(&mut out, "image prompt", &p.theme.image_prompt);
    for (i, (r, c)) in proto.results.iter().zip(&p.components).enumerate() {
        let _ = writeln!(out, "\n=== component {i}: {} ({}) ===", r.component_id, r.ctype);
        let _ = writeln!(out, "handler: {}", c.handler.name());
        let _ = writeln!(out, "backend: {}", c.backend);
        let _ = writeln!(out, "seed: {} attempt: {}", c.seed, c.attempt);
        let _ = writeln!(out, "result: {}", r.payload.summary());
        block(&mut out, "prompt", &c.prompt);
        if let Some(rp) = &c.request_prompt {
            block(&mut out, "request prompt", rp);
        }
    }
    out
}
