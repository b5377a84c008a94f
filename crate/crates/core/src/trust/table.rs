//! Decision combinator merging PDP output with the trust score.

use serde::{Deserialize, Serialize};

use crate::policy::PdpDecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CombinationOutcome {
    Allow,
    Deny,
    /// Attributes were missing; refresh them and evaluate the rules again.
    Reevaluate,
}

/// Combines the PDP decision with the trust score against threshold θ.
///
/// Permit is allowed only above the threshold; Deny always denies;
/// Indeterminate above the threshold asks for a rule re-evaluation, below it
/// denies. NotApplicable denies (deny-by-default).
pub fn combine_decision(pdp: PdpDecision, score: f64, theta: f64) -> CombinationOutcome {
    let passes = score >= theta;
    match pdp {
        PdpDecision::Permit if passes => CombinationOutcome::Allow,
        PdpDecision::Permit => CombinationOutcome::Deny,
        PdpDecision::Deny => CombinationOutcome::Deny,
        PdpDecision::Indeterminate if passes => CombinationOutcome::Reevaluate,
        PdpDecision::Indeterminate => CombinationOutcome::Deny,
        PdpDecision::NotApplicable => CombinationOutcome::Deny,
    }
}
