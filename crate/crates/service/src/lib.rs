//! HTTP/JSON session API over the `pmresched` engine.
//!
//! Each session owns one schedule. Mutations on a session run one at a time
//! and every mutating response carries the new revision; reads are served
//! from the latest published snapshot. Full recovery runs as a background
//! job that can be polled and cancelled.

mod error;
mod extract;
mod routes;
mod state;
mod store;

use std::future::Future;

pub use error::{ApiError, ApiResult};
pub use routes::{router, SearchRequest, SolveRequest, DEFAULT_RECOVERY_MILLIS, DEFAULT_UNIMPROVED_LIMIT};
pub use state::{AppState, JobState, JobStatus, Session, Snapshot};

/// Serves `state` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
