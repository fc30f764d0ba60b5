//! HTTP API over the translation pipeline: job creation and polling, human
//! annotation rounds, result download, and taxonomy, provider and glossary
//! lookup.

mod config;
mod error;
mod routes;
mod state;

use tokio::net::TcpListener;
use tracing::info;

pub use config::{ServerConfig, DEFAULT_BIND};
pub use error::{ApiError, ServerError};
pub use routes::{router, PROVIDER_KEY_HEADER};
pub use state::{AppOptions, AppState, CorpusRef, CreateJob, JobSlot, JobSummary, JobView};

/// Builds the application from `config`, binds and serves until the
/// process is stopped.
pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let state = AppState::from_config(&config)?;
    let app = router(state, config.static_dir.as_deref());
    let listener = TcpListener::bind(&config.bind).await?;
    info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}
