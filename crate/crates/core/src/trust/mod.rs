//! Trust scoring and the hybrid criteria/score authorization flow.

mod authorize;
mod config;
mod factors;
mod gate;
mod mode;
mod table;

pub use authorize::{
    authorize, AuthorizeEffects, FinalDecision, FinalOutcome, ProfileRefresher, StoreUnavailable,
};
pub use config::{DailyWindow, TrustConfig, TrustConfigError, TrustWeights};
pub use factors::{normalize_factors, trust_score, TrustFactors, TrustSignals};
pub use gate::{criteria_gate, CriteriaResult, CriterionCode};
pub use mode::{determine_mode, EvaluationMode};
pub use table::{combine_decision, CombinationOutcome};
