//! Service configuration: TOML file parsing with line-precise diagnostics
//! and startup validation.

use std::collections::HashMap;
use std::net::IpAddr;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pip::PipConfig;
use crate::policy::GeoPoint;
use crate::trust::{DailyWindow, TrustConfig, TrustWeights};

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Syntax and schema errors; the rendered message carries line/column
    /// context from the TOML parser.
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Static bootstrap credential for admin routes.
    #[serde(default)]
    pub admin_token: Option<String>,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    /// Peers whose forwarded-for header is honored.
    #[serde(default)]
    pub proxy_allowlist: Vec<IpAddr>,
    #[serde(default)]
    pub tls: TlsSettings,
    #[serde(default)]
    pub trust: TrustSection,
    #[serde(default)]
    pub pip: PipSection,
    /// Static IP-to-location table feeding the geo resolver.
    #[serde(default)]
    pub geo: HashMap<IpAddr, [f64; 2]>,
}

fn default_listen() -> String {
    "127.0.0.1:8443".into()
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("./ztiam-data")
}

fn default_queue_capacity() -> usize {
    4096
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsSettings {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub cert: Option<PathBuf>,
    #[serde(default)]
    pub key: Option<PathBuf>,
    /// Mutual-TLS mode: refuse connections lacking a CA-chained client
    /// certificate.
    #[serde(default)]
    pub require_client_cert: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustSection {
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_d0")]
    pub d0_km: f64,
    #[serde(default = "d_dmax")]
    pub dmax_km: f64,
    #[serde(default = "d_k_res")]
    pub k_res: u32,
    #[serde(default = "d_k_hist")]
    pub k_hist: u32,
    #[serde(default = "d_promote_n")]
    pub promote_n: u32,
    #[serde(default = "d_cycle_days")]
    pub cycle_days: f64,
    #[serde(default = "d_cycle_days")]
    pub penalty_window_days: f64,
    #[serde(default = "d_demote")]
    pub demote_penalties: u32,
    /// "HH:MM-HH:MM" daily window for strict criteria mode, if any.
    #[serde(default)]
    pub access_window: Option<String>,
}

fn d_threshold() -> f64 {
    0.6
}
fn d_d0() -> f64 {
    100.0
}
fn d_dmax() -> f64 {
    1000.0
}
fn d_k_res() -> u32 {
    5
}
fn d_k_hist() -> u32 {
    20
}
fn d_promote_n() -> u32 {
    10
}
fn d_cycle_days() -> f64 {
    7.0
}
fn d_demote() -> u32 {
    3
}

impl Default for TrustSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub geo: f64,
    pub res: f64,
    pub hist: f64,
    pub pen: f64,
    pub meta: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection {
            geo: 0.25,
            res: 0.20,
            hist: 0.15,
            pen: 0.25,
            meta: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipSection {
    #[serde(default = "d_refresh")]
    pub refresh_interval_secs: i64,
    #[serde(default = "d_staleness")]
    pub staleness_bound_secs: i64,
}

fn d_refresh() -> i64 {
    60
}
fn d_staleness() -> i64 {
    120
}

impl Default for PipSection {
    fn default() -> Self {
        PipSection {
            refresh_interval_secs: d_refresh(),
            staleness_bound_secs: d_staleness(),
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.trust_config()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.pip_config().validate().map_err(ConfigError::Invalid)?;
        if self.queue_capacity == 0 {
            return Err(ConfigError::Invalid(
                "queue_capacity must be positive".into(),
            ));
        }
        if self.listen.parse::<std::net::SocketAddr>().is_err() {
            return Err(ConfigError::Invalid(format!(
                "listen is not a socket address: {}",
                self.listen
            )));
        }
        if self.tls.enabled && (self.tls.cert.is_none() || self.tls.key.is_none()) {
            return Err(ConfigError::Invalid(
                "tls.enabled requires tls.cert and tls.key".into(),
            ));
        }
        for (ip, [lat, lon]) in &self.geo {
            GeoPoint::new(*lat, *lon)
                .map_err(|e| ConfigError::Invalid(format!("geo entry {ip}: {e}")))?;
        }
        Ok(())
    }

    pub fn trust_config(&self) -> Result<TrustConfig, crate::trust::TrustConfigError> {
        let t = &self.trust;
        let access_window = match &t.access_window {
            Some(text) => Some(DailyWindow::parse(text)?),
            None => None,
        };
        let cfg = TrustConfig {
            weights: TrustWeights {
                geo: t.weights.geo,
                res: t.weights.res,
                hist: t.weights.hist,
                pen: t.weights.pen,
                meta: t.weights.meta,
            },
            threshold: t.threshold,
            d0_km: t.d0_km,
            dmax_km: t.dmax_km,
            k_res: t.k_res,
            k_hist: t.k_hist,
            promote_n: t.promote_n,
            cycle_secs: (t.cycle_days * 86_400.0) as i64,
            penalty_window_secs: (t.penalty_window_days * 86_400.0) as i64,
            demote_penalties: t.demote_penalties,
            access_window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pip_config(&self) -> PipConfig {
        PipConfig {
            refresh_interval_secs: self.pip.refresh_interval_secs,
            staleness_bound_secs: self.pip.staleness_bound_secs,
        }
    }

    pub fn geo_table(&self) -> Vec<(IpAddr, GeoPoint)> {
        self.geo
            .iter()
            .filter_map(|(ip, [lat, lon])| GeoPoint::new(*lat, *lon).ok().map(|g| (*ip, g)))
            .collect()
    }
}
