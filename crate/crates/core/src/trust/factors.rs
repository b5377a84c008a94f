//! Behavioral signal normalization and the weighted trust score.

use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use super::config::TrustConfig;
use crate::policy::GeoPoint;

/// Raw behavioral inputs for one authorization request.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustSignals {
    pub request_time: i64,
    pub service_id: String,
    pub ip: IpAddr,
    pub geo: Option<GeoPoint>,
    /// Requester-to-resource great-circle distance, when both ends are known.
    pub distance_km: Option<f64>,
    pub prior_requests_same_resource: u64,
    pub prior_successful_authz_total: u64,
    pub penalties_in_window: u64,
    pub ip_seen_before: bool,
    pub service_seen_before: bool,
    pub time_in_usual_band: bool,
    pub mfa_verified_this_session: bool,
}

/// Normalized per-factor values, each in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustFactors {
    pub f_geo: f64,
    pub f_res: f64,
    pub f_hist: f64,
    pub f_pen: f64,
    pub f_meta: f64,
}

impl TrustFactors {
    pub fn as_array(&self) -> [f64; 5] {
        [self.f_geo, self.f_res, self.f_hist, self.f_pen, self.f_meta]
    }

    pub fn in_range(&self) -> bool {
        self.as_array().iter().all(|f| (0.0..=1.0).contains(f))
    }
}

/// Maps raw signals onto [0,1] factors.
///
/// * geo: 1 up to `d0`, linear ramp down to 0 at `dmax`; unknown distance
///   counts as 0.
/// * res / hist: saturating `n / (n + k)` counts.
/// * pen: reciprocal decay `1 / (1 + p)`.
/// * meta: indicator mix, ip 0.5 + service 0.25 + usual-time 0.25.
pub fn normalize_factors(s: &TrustSignals, cfg: &TrustConfig) -> TrustFactors {
    let f_geo = match s.distance_km {
        None => 0.0,
        Some(d) if d <= cfg.d0_km => 1.0,
        Some(d) if d >= cfg.dmax_km => 0.0,
        Some(d) => (cfg.dmax_km - d) / (cfg.dmax_km - cfg.d0_km),
    };
    let sat = |n: u64, k: u32| n as f64 / (n as f64 + k as f64);
    TrustFactors {
        f_geo,
        f_res: sat(s.prior_requests_same_resource, cfg.k_res),
        f_hist: sat(s.prior_successful_authz_total, cfg.k_hist),
        f_pen: 1.0 / (1.0 + s.penalties_in_window as f64),
        f_meta: 0.5 * f64::from(s.ip_seen_before)
            + 0.25 * f64::from(s.service_seen_before)
            + 0.25 * f64::from(s.time_in_usual_band),
    }
}

/// Weighted trust score: the dot product of weights and factors. Lies in
/// [0,1] whenever the config is valid and factors are normalized.
pub fn trust_score(f: &TrustFactors, cfg: &TrustConfig) -> f64 {
    let w = &cfg.weights;
    w.geo * f.f_geo + w.res * f.f_res + w.hist * f.f_hist + w.pen * f.f_pen + w.meta * f.f_meta
}

#[cfg(test)]
pub(crate) fn test_signals() -> TrustSignals {
    TrustSignals {
        request_time: 1_700_000_000,
        service_id: "svc".into(),
        ip: "203.0.113.7".parse().unwrap(),
        geo: None,
        distance_km: None,
        prior_requests_same_resource: 0,
        prior_successful_authz_total: 0,
        penalties_in_window: 0,
        ip_seen_before: false,
        service_seen_before: false,
        time_in_usual_band: false,
        mfa_verified_this_session: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_history_boundary_case() {
        let cfg = TrustConfig::default();
        let mut s = test_signals();
        s.distance_km = Some(50.0);
        let f = normalize_factors(&s, &cfg);
        assert_eq!(f.as_array(), [1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn geo_ramp_boundaries_exact() {
        let cfg = TrustConfig::default();
        let mut s = test_signals();
        s.distance_km = Some(100.0);
        assert_eq!(normalize_factors(&s, &cfg).f_geo, 1.0);
        s.distance_km = Some(1000.0);
        assert_eq!(normalize_factors(&s, &cfg).f_geo, 0.0);
        s.distance_km = None;
        assert_eq!(normalize_factors(&s, &cfg).f_geo, 0.0);
        // f_pen(0) = 1 exactly
        assert_eq!(normalize_factors(&s, &cfg).f_pen, 1.0);
    }

    #[test]
    fn worked_midpoint_example() {
        // each closed form evaluated by hand:
        // geo: (1000-550)/(1000-100) = 0.5; res: 5/10; hist: 20/40;
        // pen: 1/2; meta: 0.5 + 0.25 = 0.75
        let cfg = TrustConfig::default();
        let mut s = test_signals();
        s.distance_km = Some(550.0);
        s.prior_requests_same_resource = 5;
        s.prior_successful_authz_total = 20;
        s.penalties_in_window = 1;
        s.ip_seen_before = true;
        s.service_seen_before = true;
        let f = normalize_factors(&s, &cfg);
        assert_eq!(f.as_array(), [0.5, 0.5, 0.5, 0.5, 0.75]);
    }

    #[test]
    fn score_extremes_and_worked_example() {
        let cfg = TrustConfig::default();
        let ones = TrustFactors {
            f_geo: 1.0,
            f_res: 1.0,
            f_hist: 1.0,
            f_pen: 1.0,
            f_meta: 1.0,
        };
        let zeros = TrustFactors {
            f_geo: 0.0,
            f_res: 0.0,
            f_hist: 0.0,
            f_pen: 0.0,
            f_meta: 0.0,
        };
        assert!((trust_score(&ones, &cfg) - 1.0).abs() < 1e-12);
        assert_eq!(trust_score(&zeros, &cfg), 0.0);
        // independent dot product: .25*1 + .2*.5 + .15*.8 + .25*1 + .15*0 = 0.72
        let f = TrustFactors {
            f_geo: 1.0,
            f_res: 0.5,
            f_hist: 0.8,
            f_pen: 1.0,
            f_meta: 0.0,
        };
        assert!((trust_score(&f, &cfg) - 0.72).abs() < 1e-12);
    }

    fn arb_weights() -> impl Strategy<Value = super::super::config::TrustWeights> {
        (
            0.01f64..1.0,
            0.01f64..1.0,
            0.01f64..1.0,
            0.01f64..1.0,
            0.01f64..1.0,
        )
            .prop_map(|(a, b, c, d, e)| {
                let sum = a + b + c + d + e;
                super::super::config::TrustWeights {
                    geo: a / sum,
                    res: b / sum,
                    hist: c / sum,
                    pen: d / sum,
                    meta: e / sum,
                }
            })
    }

    proptest! {
        #[test]
        fn factors_always_in_range(
            d in proptest::option::of(0.0f64..20_000.0),
            n in 0u64..1_000_000,
            m in 0u64..1_000_000,
            p in 0u64..1_000,
            ip in any::<bool>(), svc in any::<bool>(), t in any::<bool>(),
        ) {
            let cfg = TrustConfig::default();
            let mut s = test_signals();
            s.distance_km = d;
            s.prior_requests_same_resource = n;
            s.prior_successful_authz_total = m;
            s.penalties_in_window = p;
            s.ip_seen_before = ip;
            s.service_seen_before = svc;
            s.time_in_usual_band = t;
            prop_assert!(normalize_factors(&s, &cfg).in_range());
        }

        #[test]
        fn score_in_range_and_monotone(
            w in arb_weights(),
            f in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0),
            coord in 0usize..5,
            bump in 0.0f64..=1.0,
        ) {
            let cfg = TrustConfig { weights: w, ..Default::default() };
            let f = TrustFactors { f_geo: f.0, f_res: f.1, f_hist: f.2, f_pen: f.3, f_meta: f.4 };
            let s = trust_score(&f, &cfg);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));

            let mut bumped = f;
            let slot = match coord {
                0 => &mut bumped.f_geo,
                1 => &mut bumped.f_res,
                2 => &mut bumped.f_hist,
                3 => &mut bumped.f_pen,
                _ => &mut bumped.f_meta,
            };
            *slot = (*slot + bump).min(1.0);
            prop_assert!(trust_score(&bumped, &cfg) + 1e-12 >= s);
        }
    }
}
