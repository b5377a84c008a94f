//! Server-side request-context extraction: source IP, optional geolocation,
//! server timestamp, declaring service.

use std::collections::HashMap;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::policy::GeoPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginContext {
    pub ip: IpAddr,
    pub geo: Option<GeoPoint>,
    /// Set from the server clock, never from the client.
    pub timestamp: i64,
    pub service_id: String,
}

/// Pluggable IP geolocation. Failure is expressed as `None`; strict criteria
/// mode treats absent geo as a failed criterion.
pub trait GeoResolver: Send + Sync {
    fn resolve(&self, ip: IpAddr) -> Option<GeoPoint>;
}

/// Static-table resolver used in tests and desk deployments.
#[derive(Debug, Default, Clone)]
pub struct StaticGeoResolver {
    table: HashMap<IpAddr, GeoPoint>,
}

impl StaticGeoResolver {
    pub fn new(entries: impl IntoIterator<Item = (IpAddr, GeoPoint)>) -> Self {
        StaticGeoResolver {
            table: entries.into_iter().collect(),
        }
    }
}

impl GeoResolver for StaticGeoResolver {
    fn resolve(&self, ip: IpAddr) -> Option<GeoPoint> {
        self.table.get(&ip).copied()
    }
}

/// Builds the context for one request. The forwarded-for header is honored
/// only when the direct peer is on the proxy allowlist.
pub fn extract_context(
    peer_ip: IpAddr,
    forwarded_for: Option<&str>,
    proxy_allowlist: &[IpAddr],
    service_id: &str,
    server_now: i64,
    resolver: &dyn GeoResolver,
) -> LoginContext {
    let ip = match forwarded_for {
        Some(header) if proxy_allowlist.contains(&peer_ip) => header
            .split(',')
            .next()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(peer_ip),
        _ => peer_ip,
    };
    LoginContext {
        ip,
        geo: resolver.resolve(ip),
        timestamp: server_now,
        service_id: service_id.to_string(),
    }
}
