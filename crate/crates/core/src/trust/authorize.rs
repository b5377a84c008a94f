//! The hybrid authorization flow: mode selection, criteria gating or
//! score-based combination, and the bounded re-evaluation cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::TrustConfig;
use super::factors::{normalize_factors, trust_score, TrustSignals};
use super::gate::criteria_gate;
use super::mode::{determine_mode, EvaluationMode};
use super::table::{combine_decision, CombinationOutcome};
use crate::pip::TrustProfile;
use crate::policy::{PdpDecision, RequestContext};

#[derive(Debug, Error)]
#[error("attribute store unavailable")]
pub struct StoreUnavailable;

/// Side effects the authorization flow may need mid-request.
pub trait AuthorizeEffects {
    /// Forces a PIP refresh for the requesting user and rebuilds the
    /// behavioral signals from the fresh profile. Invoked at most once per
    /// request, on the re-evaluation path.
    fn force_refresh(&mut self) -> Result<(TrustProfile, TrustSignals), StoreUnavailable>;
}

/// A refresher for flows that never retry (or tests).
pub struct ProfileRefresher<F>(pub F);

impl<F> AuthorizeEffects for ProfileRefresher<F>
where
    F: FnMut() -> Result<(TrustProfile, TrustSignals), StoreUnavailable>,
{
    fn force_refresh(&mut self) -> Result<(TrustProfile, TrustSignals), StoreUnavailable> {
        (self.0)()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FinalOutcome {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalDecision {
    pub outcome: FinalOutcome,
    pub mode_used: EvaluationMode,
    pub pdp: PdpDecision,
    /// Present iff the score-based mode ran.
    pub score: Option<f64>,
    pub reasons: Vec<String>,
    /// Number of PDP evaluations performed; never exceeds 2.
    pub pdp_evaluations: u8,
}

impl FinalDecision {
    pub fn allowed(&self) -> bool {
        self.outcome == FinalOutcome::Allow
    }

    fn deny_reason(mut self, reason: &str) -> Self {
        self.reasons.push(reason.to_string());
        self
    }
}

/// Runs one authorization cycle for an authenticated request.
///
/// Low-history principals go through the strict criteria gate and still need
/// a PDP Permit; established principals get the weighted score combined with
/// the PDP decision, with one forced attribute refresh when the combination
/// asks for re-evaluation.
pub fn authorize(
    _ctx: &RequestContext,
    signals: &TrustSignals,
    profile: &TrustProfile,
    resource_id: &str,
    cfg: &TrustConfig,
    pdp: &mut dyn FnMut() -> PdpDecision,
    effects: &mut dyn AuthorizeEffects,
) -> FinalDecision {
    let mode = determine_mode(profile, resource_id, signals.request_time, cfg);
    match mode {
        EvaluationMode::Criteria => {
            let gate = criteria_gate(signals, cfg);
            let decision = pdp();
            let mut out = FinalDecision {
                outcome: FinalOutcome::Deny,
                mode_used: EvaluationMode::Criteria,
                pdp: decision,
                score: None,
                reasons: Vec::new(),
                pdp_evaluations: 1,
            };
            for code in &gate.failures {
                out.reasons.push(code.as_str().to_string());
            }
            if gate.passed && decision == PdpDecision::Permit {
                out.outcome = FinalOutcome::Allow;
            } else if decision != PdpDecision::Permit {
                out.reasons.push(format!("PDP_{}", pdp_code(decision)));
            }
            out
        }
        EvaluationMode::ScoreBased => {
            let score = trust_score(&normalize_factors(signals, cfg), cfg);
            let decision = pdp();
            let mut out = FinalDecision {
                outcome: FinalOutcome::Deny,
                mode_used: EvaluationMode::ScoreBased,
                pdp: decision,
                score: Some(score),
                reasons: Vec::new(),
                pdp_evaluations: 1,
            };
            match combine_decision(decision, score, cfg.threshold) {
                CombinationOutcome::Allow => {
                    out.outcome = FinalOutcome::Allow;
                    out
                }
                CombinationOutcome::Deny => out.deny_reason(&deny_code(decision, score, cfg)),
                CombinationOutcome::Reevaluate => {
                    let (_fresh_profile, fresh_signals) = match effects.force_refresh() {
                        Ok(pair) => pair,
                        Err(StoreUnavailable) => {
                            return out.deny_reason("STORE_UNAVAILABLE");
                        }
                    };
                    let score2 = trust_score(&normalize_factors(&fresh_signals, cfg), cfg);
                    let decision2 = pdp();
                    out.pdp = decision2;
                    out.score = Some(score2);
                    out.pdp_evaluations = 2;
                    out.reasons.push("REEVALUATED".to_string());
                    match combine_decision(decision2, score2, cfg.threshold) {
                        CombinationOutcome::Allow => {
                            out.outcome = FinalOutcome::Allow;
                            out
                        }
                        CombinationOutcome::Deny => {
                            out.deny_reason(&deny_code(decision2, score2, cfg))
                        }
                        // still missing attributes after the refresh
                        CombinationOutcome::Reevaluate => out.deny_reason("REEVALUATION_EXHAUSTED"),
                    }
                }
            }
        }
    }
}

fn pdp_code(d: PdpDecision) -> &'static str {
    match d {
        PdpDecision::Permit => "PERMIT",
        PdpDecision::Deny => "DENY",
        PdpDecision::Indeterminate => "INDETERMINATE",
        PdpDecision::NotApplicable => "NOT_APPLICABLE",
    }
}

fn deny_code(d: PdpDecision, score: f64, cfg: &TrustConfig) -> String {
    match d {
        PdpDecision::Permit if score < cfg.threshold => "TRUST_BELOW_THRESHOLD".to_string(),
        PdpDecision::Indeterminate if score < cfg.threshold => "TRUST_BELOW_THRESHOLD".to_string(),
        other => format!("PDP_{}", pdp_code(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pip::TrustProfile;
    use crate::trust::factors::test_signals;

    struct NoRefresh;
    impl AuthorizeEffects for NoRefresh {
        fn force_refresh(&mut self) -> Result<(TrustProfile, TrustSignals), StoreUnavailable> {
            panic!("refresh not expected in this test");
        }
    }

    fn established_profile(res: &str) -> TrustProfile {
        let mut p = TrustProfile::empty("alice", 0);
        p.first_granted.insert(res.to_string());
        p.per_resource_success.insert(res.to_string(), 10);
        p.total_successful_authz = 10;
        p
    }

    fn run(
        signals: &TrustSignals,
        profile: &TrustProfile,
        decisions: &[PdpDecision],
        effects: &mut dyn AuthorizeEffects,
    ) -> FinalDecision {
        let ctx = RequestContext::new(signals.request_time);
        let cfg = TrustConfig::default();
        let mut i = 0;
        let seq: Vec<PdpDecision> = decisions.to_vec();
        let mut pdp = move || {
            let d = seq[i.min(seq.len() - 1)];
            i += 1;
            d
        };
        authorize(&ctx, signals, profile, "res-1", &cfg, &mut pdp, effects)
    }

    #[test]
    fn new_user_allows_via_criteria_when_gate_and_pdp_pass() {
        let mut s = test_signals();
        s.distance_km = Some(72.0);
        let p = TrustProfile::empty("alice", 0);
        let d = run(&s, &p, &[PdpDecision::Permit], &mut NoRefresh);
        assert!(d.allowed());
        assert_eq!(d.mode_used, EvaluationMode::Criteria);
        assert_eq!(d.score, None);
        assert_eq!(d.pdp_evaluations, 1);
    }

    #[test]
    fn criteria_mode_denies_on_any_failed_criterion_even_with_permit() {
        let mut s = test_signals();
        s.distance_km = Some(72.0);
        s.penalties_in_window = 1;
        let p = TrustProfile::empty("alice", 0);
        let d = run(&s, &p, &[PdpDecision::Permit], &mut NoRefresh);
        assert!(!d.allowed());
        assert!(d.reasons.iter().any(|r| r == "PENALTY_PRESENT"));
    }

    #[test]
    fn score_mode_allows_above_threshold() {
        let mut s = test_signals();
        s.distance_km = Some(50.0);
        s.prior_requests_same_resource = 10;
        s.prior_successful_authz_total = 10;
        s.ip_seen_before = true;
        s.service_seen_before = true;
        s.time_in_usual_band = true;
        let p = established_profile("res-1");
        let d = run(&s, &p, &[PdpDecision::Permit], &mut NoRefresh);
        assert!(d.allowed());
        assert_eq!(d.mode_used, EvaluationMode::ScoreBased);
        assert!(d.score.unwrap() >= 0.6);
    }

    #[test]
    fn deny_dominance_no_allow_for_deny_or_not_applicable() {
        let mut s = test_signals();
        s.distance_km = Some(10.0);
        s.prior_requests_same_resource = 100;
        s.prior_successful_authz_total = 100;
        s.ip_seen_before = true;
        s.service_seen_before = true;
        s.time_in_usual_band = true;
        let p = established_profile("res-1");
        for pdp in [PdpDecision::Deny, PdpDecision::NotApplicable] {
            let d = run(&s, &p, &[pdp], &mut NoRefresh);
            assert!(!d.allowed(), "pdp {pdp:?} must never allow");
        }
    }

    #[test]
    fn indeterminate_twice_denies_with_two_pdp_evaluations() {
        let mut s = test_signals();
        s.distance_km = Some(10.0);
        s.prior_requests_same_resource = 100;
        s.prior_successful_authz_total = 100;
        s.ip_seen_before = true;
        s.service_seen_before = true;
        s.time_in_usual_band = true;
        let p = established_profile("res-1");
        let signals_clone = s.clone();
        let profile_clone = p.clone();
        let mut effects =
            ProfileRefresher(move || Ok((profile_clone.clone(), signals_clone.clone())));
        let d = run(
            &s,
            &p,
            &[PdpDecision::Indeterminate, PdpDecision::Indeterminate],
            &mut effects,
        );
        assert!(!d.allowed());
        assert_eq!(d.pdp_evaluations, 2);
        assert!(d.reasons.iter().any(|r| r == "REEVALUATION_EXHAUSTED"));
    }

    #[test]
    fn reevaluate_then_permit_allows() {
        let mut s = test_signals();
        s.distance_km = Some(10.0);
        s.prior_requests_same_resource = 100;
        s.prior_successful_authz_total = 100;
        s.ip_seen_before = true;
        s.service_seen_before = true;
        s.time_in_usual_band = true;
        let p = established_profile("res-1");
        let signals_clone = s.clone();
        let profile_clone = p.clone();
        let mut effects =
            ProfileRefresher(move || Ok((profile_clone.clone(), signals_clone.clone())));
        let d = run(
            &s,
            &p,
            &[PdpDecision::Indeterminate, PdpDecision::Permit],
            &mut effects,
        );
        assert!(d.allowed());
        assert_eq!(d.pdp_evaluations, 2);
    }

    #[test]
    fn refresh_failure_fails_closed() {
        let mut s = test_signals();
        s.distance_km = Some(10.0);
        s.prior_requests_same_resource = 100;
        s.prior_successful_authz_total = 100;
        s.ip_seen_before = true;
        s.service_seen_before = true;
        s.time_in_usual_band = true;
        let p = established_profile("res-1");
        let mut effects = ProfileRefresher(|| Err(StoreUnavailable));
        let d = run(&s, &p, &[PdpDecision::Indeterminate], &mut effects);
        assert!(!d.allowed());
        assert!(d.reasons.iter().any(|r| r == "STORE_UNAVAILABLE"));
        assert_eq!(d.pdp_evaluations, 1);
    }
}
