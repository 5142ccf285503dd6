use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use maxproto_service::{AppState, ServiceConfig};

use crate::config::FileConfig;
use crate::{build_backends, build_engine, BackendArgs, CliError};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// host:port to listen on.
    #[arg(long)]
    pub addr: Option<String>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub icons: Option<PathBuf>,
    /// Append-only session snapshots; sessions found here are restored.
    #[arg(long)]
    pub snapshot_dir: Option<PathBuf>,
    /// Idle session lifetime in hours.
    #[arg(long)]
    pub ttl_hours: Option<u32>,
}

pub fn run(a: ServeArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let kb = a.kb.or_else(|| cfg.kb.clone()).ok_or_else(|| CliError::input("--kb is required"))?;
    let icons = a.icons.or_else(|| cfg.icons.clone()).ok_or_else(|| CliError::input("--icons is required"))?;
    let backends = build_backends(a.backend.backend.or(cfg.backend).unwrap_or_default(), cfg)?;
    let engine = build_engine(backends, &kb, &icons, cfg)?;

    let mut sc = ServiceConfig {
        snapshot_dir: a.snapshot_dir.or_else(|| cfg.serve.snapshot_dir.clone()),
        render: cfg.render.options(),
        fit_canvas: cfg.render.out_h.is_none(),
        ..ServiceConfig::default()
    };
    if let Some(h) = a.ttl_hours.or(cfg.serve.session_ttl_hours) {
        sc = sc.with_ttl_hours(h);
    }
    let state = AppState::new(Arc::new(engine), sc).map_err(|e| CliError::input(e.to_string()))?;
    let addr = a.addr.or_else(|| cfg.serve.addr.clone()).unwrap_or_else(|| DEFAULT_ADDR.to_string());

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::input(format!("cannot start runtime: {e}")))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::input(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::input(e.to_string()))?;
        println!("listening on http://{local}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        maxproto_service::serve(listener, state, shutdown)
            .await
            .map_err(|e| CliError::input(format!("server error: {e}")))
    })
}
