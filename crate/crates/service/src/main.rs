use std::net::SocketAddr;
use std::path::PathBuf;

use axum::http::HeaderValue;
use clap::Parser;
use tracing::info;
use tracing_subscriber::EnvFilter;
use vedit_service::{router, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "vedit-serve",
    version,
    about = "HTTP service for interactive vedit sessions"
)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Mirror sessions to this directory and reload them on start.
    #[arg(long)]
    persist_dir: Option<PathBuf>,
    /// Allowed browser origin; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
    /// Worker threads for pipeline work; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    vedit_core::par::configure_threads(args.threads);

    let state = AppState::new(args.persist_dir);
    let restored = state.restore().await?;
    if restored > 0 {
        info!("restored {restored} sessions");
    }
    let origin = args
        .cors_origin
        .map(|o| HeaderValue::from_str(&o))
        .transpose()?;
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, origin)).await?;
    Ok(())
}
