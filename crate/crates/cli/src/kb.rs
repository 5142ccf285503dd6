use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use maxproto_core::backends::{EmbeddingBackend, RetryPolicy};
use maxproto_core::knowledge::{
    embed_records, ingest_icons, ingest_ui_records, IconStore, IngestReport, KbError, KnowledgeStore, StoreRecord, UiStore,
};
use serde_json::Value;

use crate::config::FileConfig;
use crate::{build_backends, BackendArgs, CliError};

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// Ingest annotated UI screens into a UI store.
    Build(BuildArgs),
    /// Ingest an icon library into an icon store.
    Icons(IconsArgs),
    /// Embed the remaining records of an existing store in place.
    Embed(EmbedArgs),
    /// Print record count, dimension, embedding progress and content hash.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// File or directory of .json / .jsonl screen records.
    #[arg(long)]
    pub source: PathBuf,
    /// JSON map of record id to theme attributes.
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub embed: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct IconsArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub embed: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub store: PathBuf,
}

pub fn run(cmd: KbCommand, cfg: &FileConfig) -> Result<(), CliError> {
    match cmd {
        KbCommand::Build(a) => {
            let (store, report) = ingest_ui_records(&a.source, a.captions.as_deref()).map_err(CliError::kb)?;
            print_report(&report);
            finish(store, &a.out, a.embed.then_some(&a.backend), cfg)
        }
        KbCommand::Icons(a) => {
            let (store, report) = ingest_icons(&a.source).map_err(CliError::kb)?;
            print_report(&report);
            finish(store, &a.out, a.embed.then_some(&a.backend), cfg)
        }
        KbCommand::Embed(a) => match store_kind(&a.store)?.as_str() {
            "ui" => finish(UiStore::load(&a.store).map_err(CliError::kb)?, &a.store, Some(&a.backend), cfg),
            _ => finish(IconStore::load(&a.store).map_err(CliError::kb)?, &a.store, Some(&a.backend), cfg),
        },
        KbCommand::Info(a) => {
            match store_kind(&a.store)?.as_str() {
                "ui" => print_summary(&a.store, &UiStore::load(&a.store).map_err(CliError::kb)?),
                _ => print_summary(&a.store, &IconStore::load(&a.store).map_err(CliError::kb)?),
            }
            Ok(())
        }
    }
}

fn store_kind(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read store {}: {e}", path.display())))?;
    let header: Value = text
        .lines()
        .next()
        .and_then(|l| serde_json::from_str(l).ok())
        .ok_or_else(|| CliError::input(format!("{}: missing store header", path.display())))?;
    match header.get("kind").and_then(Value::as_str) {
        Some(k @ ("ui" | "icon")) => Ok(k.to_string()),
        _ => Err(CliError::input(format!("{}: store header has no valid kind", path.display()))),
    }
}

fn print_report(report: &IngestReport) {
    print!("{report}");
}

fn print_summary<R: StoreRecord>(path: &Path, store: &KnowledgeStore<R>) {
    let embedded = store.records().iter().filter(|r| r.embedding().is_some()).count();
    println!(
        "store {}: records={} dim={} embedded={}/{} hash={}",
        path.display(),
        store.len(),
        store.dim().unwrap_or(0),
        embedded,
        store.len(),
        store.content_hash()
    );
}

/// Optionally embeds, then saves. A failed embedding still saves the
/// records done so far so `kb embed` can resume.
fn finish<R: StoreRecord>(
    mut store: KnowledgeStore<R>,
    out: &Path,
    embed_with: Option<&BackendArgs>,
    cfg: &FileConfig,
) -> Result<(), CliError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::input(format!("cannot create {}: {e}", parent.display())))?;
    }
    let outcome = match embed_with {
        Some(b) => {
            let backends = build_backends(b.backend.or(cfg.backend).unwrap_or_default(), cfg)?;
            embed(&mut store, backends.embedder.as_ref())
        }
        None => Ok(()),
    };
    store.save(out).map_err(CliError::kb)?;
    print_summary(out, &store);
    outcome
}

fn embed<R: StoreRecord>(store: &mut KnowledgeStore<R>, embedder: &dyn EmbeddingBackend) -> Result<(), CliError> {
    match embed_records(store, embedder, RetryPolicy::default()) {
        Ok(r) => {
            println!("embedded={} already_present={}", r.embedded, r.already_present);
            Ok(())
        }
        Err(e @ KbError::PartialEmbedding { .. }) => {
            Err(CliError::Backend(format!("{e}; progress saved, rerun `maxproto kb embed` to resume")))
        }
        Err(e) => Err(CliError::kb(e)),
    }
}
