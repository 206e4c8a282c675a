//! Runs the HTTP service until SIGINT or SIGTERM.

use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};

use chainshell_service::{serve, AppState, Config};
use tokio::net::TcpListener;

use crate::Failure;

/// Status output; a closed stdout must not bring the server down.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("SIGTERM handler installs");
        tokio::select! {
            _ = interrupt => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = interrupt.await;
}

pub fn run(config: Config) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Failed(format!("runtime: {e}")))?;
    rt.block_on(async {
        for line in config.describe() {
            say(&line);
        }
        let state = AppState::open(config.clone()).map_err(|e| Failure::Failed(e.to_string()))?;
        let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, config.port));
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::Failed(format!("cannot listen on {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(|e| Failure::Failed(e.to_string()))?;
        say(&format!("listening on {bound}"));
        serve(listener, state, shutdown_signal())
            .await
            .map_err(|e| Failure::Failed(format!("server: {e}")))?;
        say("stopped");
        Ok(())
    })
}
