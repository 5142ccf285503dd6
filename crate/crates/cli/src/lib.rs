//! `maxproto` command line: knowledge-base builds, one-shot generation,
//! metric evaluation and the HTTP service.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use maxproto_core::agents::{Engine, Templates};
use maxproto_core::backends::{Backends, RemoteChat, RemoteEmbedding, RemoteImage, RetryPolicy};
use maxproto_core::knowledge::{embed_records, IconStore, KnowledgeStore, StoreRecord, UiStore};

pub mod config;
pub mod error;
pub mod eval;
pub mod generate;
pub mod kb;
pub mod serve;

use config::{BackendKind, FileConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "maxproto", version, about = "Multi-agent UI prototype generator")]
pub struct Cli {
    /// Config file (default: ./maxproto.toml when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and embed knowledge stores.
    #[command(subcommand)]
    Kb(kb::KbCommand),
    /// Generate a prototype from a prompt and a wireframe.
    Generate(generate::GenerateArgs),
    /// FID and GD of a generated set against a real set.
    Eval(eval::EvalArgs),
    /// Run the HTTP API.
    Serve(serve::ServeArgs),
}

/// Backend selection shared by several subcommands.
#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Model backends: deterministic mocks or HTTP endpoints.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
}

pub fn build_backends(kind: BackendKind, cfg: &FileConfig) -> Result<Backends, CliError> {
    match kind {
        BackendKind::Mock => Ok(Backends::mock()),
        BackendKind::Remote => {
            let rc = cfg.remote.config();
            let bad = |e: maxproto_core::backends::BackendError| CliError::input(format!("remote backend misconfigured: {e}"));
            Ok(Backends {
                chat: Arc::new(RemoteChat::new(&rc).map_err(bad)?),
                embedder: Arc::new(RemoteEmbedding::new(&rc).map_err(bad)?),
                image: Arc::new(RemoteImage::new(&rc).map_err(bad)?),
            })
        }
    }
}

/// Loads a store, embedding any records that still lack a vector.
pub fn load_store<R: StoreRecord>(path: &std::path::Path, backends: &Backends) -> Result<KnowledgeStore<R>, CliError> {
    let mut store = KnowledgeStore::<R>::load(path).map_err(CliError::kb)?;
    if !store.is_fully_embedded() {
        let report = embed_records(&mut store, backends.embedder.as_ref(), RetryPolicy::default()).map_err(CliError::kb)?;
        tracing::info!(path = %path.display(), embedded = report.embedded, "embedded store on the fly");
    }
    Ok(store)
}

/// Engine from the stores at `kb` and `icons`.
pub fn build_engine(
    backends: Backends,
    kb: &std::path::Path,
    icons: &std::path::Path,
    cfg: &FileConfig,
) -> Result<Engine, CliError> {
    let ui: UiStore = load_store(kb, &backends)?;
    let ic: IconStore = load_store(icons, &backends)?;
    assemble(backends, ui, ic, cfg)
}

pub fn assemble(backends: Backends, ui: UiStore, icons: IconStore, cfg: &FileConfig) -> Result<Engine, CliError> {
    let templates = match &cfg.templates {
        Some(p) => Templates::load(p).map_err(|e| CliError::input(e.to_string()))?,
        None => Templates::default(),
    };
    Engine::new(backends, Arc::new(ui), Arc::new(icons), templates, cfg.engine).map_err(CliError::engine)
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = FileConfig::discover(cli.config.as_deref())?;
    match cli.command {
        Command::Kb(c) => kb::run(c, &cfg),
        Command::Generate(a) => generate::run(a, &cfg),
        Command::Eval(a) => eval::run(a),
        Command::Serve(a) => serve::run(a, &cfg),
    }
}
