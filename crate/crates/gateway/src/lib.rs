//! HTTP gateway: the entry point into the software-defined perimeter.
//!
//! Exposes authentication, device enrollment and authentication,
//! authorization, policy administration, and inspection over a JSON API.
//! All decision logic lives in `ztiam-core`; this crate only adapts it to
//! HTTP, extracts request context server-side, and enforces the perimeter
//! (sessions, admin token, rate limits, optional mutual TLS).

mod ratelimit;
mod routes;
mod state;
mod tls;

pub use ratelimit::RateLimiter;
pub use routes::router;
pub use state::{AppState, CorrelatedSink};
pub use tls::{client_tls_config, server_tls_config};

use std::net::SocketAddr;
use std::sync::Arc;

/// Serves the API over plain HTTP on an already-bound listener. Used by
/// tests and deployments that terminate TLS elsewhere.
pub async fn serve_plain(
    state: Arc<AppState>,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    axum::serve(
        listener,
        router(state).into_make_service_with_connect_info::<SocketAddr>(),
    )
    .await
}

/// Serves the API over TLS (optionally mutual) on `addr`.
pub async fn serve_tls(
    state: Arc<AppState>,
    addr: SocketAddr,
    tls: rustls::ServerConfig,
) -> std::io::Result<()> {
    let config = axum_server::tls_rustls::RustlsConfig::from_config(Arc::new(tls));
    axum_server::bind_rustls(addr, config)
        .serve(router(state).into_make_service_with_connect_info::<SocketAddr>())
        .await
}
