//! Per-request evaluation mode selection.

use serde::{Deserialize, Serialize};

use super::config::TrustConfig;
use crate::pip::TrustProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvaluationMode {
    Criteria,
    ScoreBased,
}

/// Picks the evaluation mode for a (user, resource) pair.
///
/// Recomputed from the trailing window on every request, which realizes the
/// cycle semantics: a user is promoted to score-based evaluation only while
/// the window shows enough recent successes on that resource and demoted as
/// soon as penalties accumulate or the resource is new to them.
pub fn determine_mode(
    profile: &TrustProfile,
    resource_id: &str,
    _now: i64,
    cfg: &TrustConfig,
) -> EvaluationMode {
    let first_time = !profile.first_granted.contains(resource_id);
    let in_window_successes = profile
        .per_resource_success
        .get(resource_id)
        .copied()
        .unwrap_or(0);
    let demoted = profile.penalties_in_window >= cfg.demote_penalties as u64;
    if first_time || in_window_successes < cfg.promote_n as u64 || demoted {
        EvaluationMode::Criteria
    } else {
        EvaluationMode::ScoreBased
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pip::TrustProfile;

    fn profile_with(res: &str, successes: u64, penalties: u64) -> TrustProfile {
        let mut p = TrustProfile::empty("alice", 0);
        if successes > 0 {
            p.per_resource_success.insert(res.to_string(), successes);
            p.first_granted.insert(res.to_string());
            p.total_successful_authz = successes;
        }
        p.penalties_in_window = penalties;
        p
    }

    #[test]
    fn fresh_user_is_criteria() {
        let cfg = TrustConfig::default();
        let p = TrustProfile::empty("alice", 0);
        assert_eq!(
            determine_mode(&p, "res-1", 0, &cfg),
            EvaluationMode::Criteria
        );
    }

    #[test]
    fn promotion_at_exactly_promote_n() {
        let cfg = TrustConfig::default();
        assert_eq!(
            determine_mode(&profile_with("r", 9, 0), "r", 0, &cfg),
            EvaluationMode::Criteria
        );
        assert_eq!(
            determine_mode(&profile_with("r", 10, 0), "r", 0, &cfg),
            EvaluationMode::ScoreBased
        );
    }

    #[test]
    fn first_request_to_new_resource_is_criteria() {
        let cfg = TrustConfig::default();
        let p = profile_with("res-r", 10, 0);
        assert_eq!(
            determine_mode(&p, "res-s", 0, &cfg),
            EvaluationMode::Criteria
        );
    }

    #[test]
    fn demotion_at_penalty_threshold() {
        let cfg = TrustConfig::default();
        assert_eq!(
            determine_mode(&profile_with("r", 10, 2), "r", 0, &cfg),
            EvaluationMode::ScoreBased
        );
        assert_eq!(
            determine_mode(&profile_with("r", 10, 3), "r", 0, &cfg),
            EvaluationMode::Criteria
        );
    }
}
