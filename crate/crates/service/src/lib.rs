//! The networked side of chainshell: users and roles, versioned knowledge
//! bases with a rule-level editing API, server-held consultations pinned
//! to a knowledge-base version, and an archive of replayable cases.

mod api;
pub mod auth;
pub mod config;
pub mod consult;
pub mod permissions;
pub mod store;

use std::future::Future;
use std::io;

use tokio::net::TcpListener;

pub use api::{router, verify_case, AppState, DiagnosticView};
pub use config::Config;

/// Serves the API on `listener` until `shutdown` completes; in-flight
/// requests are allowed to finish.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
