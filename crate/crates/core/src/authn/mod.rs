//! Multi-factor user authentication: password verification, TOTP soft
//! tokens, two-stage login, session issuance, and request-context
//! extraction.

mod accounts;
mod context;
mod password;
mod totp;

pub use accounts::{
    AccountStatus, AuthnConfig, AuthnError, AuthnService, PendingHandle, RegisterOutput,
    SessionHandle, SessionView,
};
pub use context::{extract_context, GeoResolver, LoginContext, StaticGeoResolver};
pub use password::{hash_password, verify_password, PasswordRecord};
pub use totp::{provisioning_uri, totp_code, verify_totp_code, TOTP_DIGITS, TOTP_STEP_SECS};
