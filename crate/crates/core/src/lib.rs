//! Core building blocks for a zero-trust identity and access management service.
//!
//! The crate is organized around the classic XACML roles plus the trust
//! machinery that sits next to them:
//!
//! * [`policy`] — ABAC policy documents, the decision point, and the
//!   registered condition functions (including great-circle distance).
//! * [`trust`] — behavioral signal normalization, the weighted trust score,
//!   the criteria gate for low-history principals, and the decision
//!   combinator that merges PDP output with the score.
//! * [`authn`] — password + TOTP multi-factor login and session issuance.
//! * [`pki`] — internal certificate authority, device enrollment,
//!   challenge-response device authentication, and the sealed keystore.
//! * [`events`] — append-only audit log with an asynchronous bounded queue.
//! * [`pip`] — windowed aggregation of the audit log into per-user
//!   trust profiles.
//! * [`config`] — service configuration loading and validation.

pub mod authn;
pub mod config;
pub mod events;
pub mod pip;
pub mod pki;
pub mod policy;
pub mod trust;

/// Current unix time in whole seconds.
pub fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs() as i64
}
