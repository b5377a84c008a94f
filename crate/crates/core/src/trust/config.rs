//! Trust engine configuration: factor weights, threshold, and the windows
//! driving mode transitions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrustConfigError {
    #[error("trust.weights must be non-negative and sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("trust.threshold must lie in [0,1], got {0}")]
    BadThreshold(f64),
    #[error("trust distance ramp requires dmax > d0 > 0 (d0 = {d0}, dmax = {dmax})")]
    BadDistanceRamp { d0: f64, dmax: f64 },
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error("access window {0:?} must be HH:MM-HH:MM")]
    BadAccessWindow(String),
}

/// Per-factor weights; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustWeights {
    pub geo: f64,
    pub res: f64,
    pub hist: f64,
    pub pen: f64,
    pub meta: f64,
}

impl TrustWeights {
    pub fn sum(&self) -> f64 {
        self.geo + self.res + self.hist + self.pen + self.meta
    }
}

/// A daily access window on seconds-of-day, inclusive; start > end wraps
/// across midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyWindow {
    pub start_sec: u32,
    pub end_sec: u32,
}

impl DailyWindow {
    /// Parses the `HH:MM-HH:MM` config form.
    pub fn parse(s: &str) -> Result<Self, TrustConfigError> {
        let err = || TrustConfigError::BadAccessWindow(s.to_string());
        let (a, b) = s.split_once('-').ok_or_else(err)?;
        let part = |p: &str| -> Result<u32, TrustConfigError> {
            let (h, m) = p.split_once(':').ok_or_else(err)?;
            let h: u32 = h.parse().map_err(|_| err())?;
            let m: u32 = m.parse().map_err(|_| err())?;
            if h > 23 || m > 59 {
                return Err(err());
            }
            Ok(h * 3600 + m * 60)
        };
        Ok(DailyWindow {
            start_sec: part(a)?,
            end_sec: part(b)?,
        })
    }

    pub fn contains(&self, unix_ts: i64) -> bool {
        let t = unix_ts.rem_euclid(86_400) as u32;
        if self.start_sec <= self.end_sec {
            self.start_sec <= t && t <= self.end_sec
        } else {
            t >= self.start_sec || t <= self.end_sec
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustConfig {
    pub weights: TrustWeights,
    /// Score threshold θ; there is no canonical value, so the default is
    /// a deployment choice and config-overridable.
    pub threshold: f64,
    /// Distance at or below which the geo factor saturates at 1.
    pub d0_km: f64,
    /// Distance at or beyond which the geo factor reaches 0.
    pub dmax_km: f64,
    /// Half-saturation constant for the same-resource request count.
    pub k_res: u32,
    /// Half-saturation constant for the total success count.
    pub k_hist: u32,
    /// In-window successes on a resource needed to move to score mode.
    pub promote_n: u32,
    /// Trailing evaluation cycle, in seconds.
    pub cycle_secs: i64,
    /// Trailing penalty window, in seconds.
    pub penalty_window_secs: i64,
    /// Penalties in window that force a fall back to criteria mode.
    pub demote_penalties: u32,
    /// Optional global daily access window enforced by the criteria gate.
    pub access_window: Option<DailyWindow>,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            weights: TrustWeights {
                geo: 0.25,
                res: 0.20,
                hist: 0.15,
                pen: 0.25,
                meta: 0.15,
            },
            threshold: 0.6,
            d0_km: 100.0,
            dmax_km: 1000.0,
            k_res: 5,
            k_hist: 20,
            promote_n: 10,
            cycle_secs: 7 * 86_400,
            penalty_window_secs: 7 * 86_400,
            demote_penalties: 3,
            access_window: None,
        }
    }
}

impl TrustConfig {
    pub fn validate(&self) -> Result<(), TrustConfigError> {
        let w = &self.weights;
        let nonneg = w.geo >= 0.0 && w.res >= 0.0 && w.hist >= 0.0 && w.pen >= 0.0 && w.meta >= 0.0;
        if !nonneg || (w.sum() - 1.0).abs() > 1e-9 {
            return Err(TrustConfigError::BadWeights(w.sum()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(TrustConfigError::BadThreshold(self.threshold));
        }
        if !(self.dmax_km > self.d0_km && self.d0_km > 0.0) {
            return Err(TrustConfigError::BadDistanceRamp {
                d0: self.d0_km,
                dmax: self.dmax_km,
            });
        }
        for (field, v) in [
            ("trust.k_res", self.k_res as i64),
            ("trust.k_hist", self.k_hist as i64),
            ("trust.promote_n", self.promote_n as i64),
            ("trust.cycle", self.cycle_secs),
            ("trust.penalty_window", self.penalty_window_secs),
            ("trust.demote_penalties", self.demote_penalties as i64),
        ] {
            if v <= 0 {
                return Err(TrustConfigError::NonPositive { field });
            }
        }
        Ok(())
    }
}
