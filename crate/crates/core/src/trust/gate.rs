//! Strict criteria gate applied to principals without relevant history.

use serde::{Deserialize, Serialize};

use super::config::TrustConfig;
use super::factors::TrustSignals;

/// Machine-readable reasons a criterion failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriterionCode {
    GeoUnknown,
    GeoOutOfPerimeter,
    PenaltyPresent,
    MfaNotVerified,
    OutsideAccessWindow,
}

impl CriterionCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionCode::GeoUnknown => "GEO_UNKNOWN",
            CriterionCode::GeoOutOfPerimeter => "GEO_OUT_OF_PERIMETER",
            CriterionCode::PenaltyPresent => "PENALTY_PRESENT",
            CriterionCode::MfaNotVerified => "MFA_NOT_VERIFIED",
            CriterionCode::OutsideAccessWindow => "OUTSIDE_ACCESS_WINDOW",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaResult {
    pub passed: bool,
    pub failures: Vec<CriterionCode>,
}

/// All criteria must hold: known distance within the perimeter, a clean
/// penalty window, MFA on this session, and the global access window when
/// one is configured. New users have no usual-hours band, so familiarity is
/// deliberately not required here.
pub fn criteria_gate(s: &TrustSignals, cfg: &TrustConfig) -> CriteriaResult {
    let mut failures = Vec::new();
    match s.distance_km {
        None => failures.push(CriterionCode::GeoUnknown),
        Some(d) if d > cfg.d0_km => failures.push(CriterionCode::GeoOutOfPerimeter),
        Some(_) => {}
    }
    if s.penalties_in_window > 0 {
        failures.push(CriterionCode::PenaltyPresent);
    }
    if !s.mfa_verified_this_session {
        failures.push(CriterionCode::MfaNotVerified);
    }
    if let Some(w) = &cfg.access_window {
        if !w.contains(s.request_time) {
            failures.push(CriterionCode::OutsideAccessWindow);
        }
    }
    CriteriaResult {
        passed: failures.is_empty(),
        failures,
    }
}
