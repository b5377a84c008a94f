//! Account, pending-login, and session state machines: registration with
//! TOTP provisioning, two-stage login with lockout, bearer sessions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::context::LoginContext;
use super::password::{hash_password, verify_password, PasswordRecord};
use super::totp::{provisioning_uri, verify_totp_code, TOTP_DIGITS, TOTP_STEP_SECS};
use crate::events::{EventContext, EventDraft, EventKind, EventSink};

#[derive(Debug, Clone)]
pub struct AuthnConfig {
    pub issuer: String,
    pub min_password_chars: usize,
    pub lockout_failures: u32,
    pub lockout_window_secs: i64,
    pub lockout_duration_secs: i64,
    pub pending_ttl_secs: i64,
    pub pending_max_attempts: u32,
    pub session_ttl_secs: i64,
}

impl Default for AuthnConfig {
    fn default() -> Self {
        AuthnConfig {
            issuer: "ztiam".into(),
            min_password_chars: 12,
            lockout_failures: 5,
            lockout_window_secs: 15 * 60,
            lockout_duration_secs: 15 * 60,
            pending_ttl_secs: 120,
            pending_max_attempts: 3,
            session_ttl_secs: 3600,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuthnError {
    #[error("username already registered")]
    UsernameTaken,
    #[error("password shorter than the required minimum")]
    WeakPassword,
    #[error("invalid username or password")]
    BadCredentials,
    #[error("account locked")]
    AccountLocked,
    #[error("one-time code invalid")]
    CodeInvalid,
    #[error("pending login expired or already used")]
    PendingExpired,
    #[error("too many one-time code attempts")]
    TooManyAttempts,
}

impl AuthnError {
    pub fn code(&self) -> &'static str {
        match self {
            AuthnError::UsernameTaken => "USERNAME_TAKEN",
            AuthnError::WeakPassword => "WEAK_PASSWORD",
            AuthnError::BadCredentials => "BAD_CREDENTIALS",
            AuthnError::AccountLocked => "ACCOUNT_LOCKED",
            AuthnError::CodeInvalid => "CODE_INVALID",
            AuthnError::PendingExpired => "PENDING_EXPIRED",
            AuthnError::TooManyAttempts => "TOO_MANY_ATTEMPTS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccountStatus {
    Active,
    Locked,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterOutput {
    pub user_id: String,
    pub username: String,
    pub org: String,
    pub provisioning_uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingHandle {
    pub pending_id: String,
    pub expires_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionHandle {
    pub token: String,
    pub user_id: String,
    pub expires_at: i64,
}

/// What the gateway learns from a presented bearer token.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionView {
    pub user_id: String,
    pub username: String,
    pub org: String,
    pub context: LoginContext,
    pub issued_at: i64,
    pub expires_at: i64,
}

struct Account {
    user_id: String,
    password: PasswordRecord,
    totp_secret: Vec<u8>,
    totp_confirmed: bool,
    org: String,
    #[allow(dead_code)]
    created_at: i64,
    failure_times: Vec<i64>,
    locked_until: Option<i64>,
}

struct Pending {
    username: String,
    context: LoginContext,
    expires_at: i64,
    attempts_left: u32,
    used: bool,
}

struct Session {
    view: SessionView,
}

struct Inner {
    accounts: HashMap<String, Account>,
    pendings: HashMap<String, Pending>,
    sessions: HashMap<[u8; 32], Session>,
}

/// All account state transitions happen under one lock, so failure
/// counting, lockout, and pending consumption are atomic; at most one
/// caller wins a given pending_id.
pub struct AuthnService {
    cfg: AuthnConfig,
    sink: Arc<dyn EventSink>,
    inner: Mutex<Inner>,
    /// Verified against for unknown usernames so the error is uniform in
    /// both content and timing.
    decoy: PasswordRecord,
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rngs::OsRng.fill_bytes(&mut buf);
    hex::encode(buf)
}

fn token_key(token: &str) -> [u8; 32] {
    Sha256::digest(token.as_bytes()).into()
}

fn event_context(ctx: &LoginContext) -> EventContext {
    EventContext {
        ip: Some(ctx.ip),
        geo: ctx.geo,
        timestamp: ctx.timestamp,
        service_id: Some(ctx.service_id.clone()),
    }
}

impl AuthnService {
    pub fn new(cfg: AuthnConfig, sink: Arc<dyn EventSink>) -> Self {
        AuthnService {
            cfg,
            sink,
            inner: Mutex::new(Inner {
                accounts: HashMap::new(),
                pendings: HashMap::new(),
                sessions: HashMap::new(),
            }),
            decoy: hash_password(&random_hex(16)),
        }
    }

    pub fn config(&self) -> &AuthnConfig {
        &self.cfg
    }

    pub fn register(
        &self,
        username: &str,
        password: &str,
        org: &str,
        now: i64,
    ) -> Result<RegisterOutput, AuthnError> {
        if password.chars().count() < self.cfg.min_password_chars {
            return Err(AuthnError::WeakPassword);
        }
        let mut inner = self.inner.lock().expect("authn lock");
        if inner.accounts.contains_key(username) {
            return Err(AuthnError::UsernameTaken);
        }
        let mut secret = vec![0u8; 20];
        rand::rngs::OsRng.fill_bytes(&mut secret);
        let user_id = format!("u-{}", random_hex(8));
        let uri = provisioning_uri(&self.cfg.issuer, username, &secret);
        inner.accounts.insert(
            username.to_string(),
            Account {
                user_id: user_id.clone(),
                password: hash_password(password),
                totp_secret: secret,
                totp_confirmed: false,
                org: org.to_string(),
                created_at: now,
                failure_times: Vec::new(),
                locked_until: None,
            },
        );
        drop(inner);
        let _ = self
            .sink
            .emit(EventDraft::new(EventKind::Register, username, now).detail("org", org));
        Ok(RegisterOutput {
            user_id,
            username: username.to_string(),
            org: org.to_string(),
            provisioning_uri: uri,
        })
    }

    pub fn account_status(&self, username: &str, now: i64) -> Option<AccountStatus> {
        let inner = self.inner.lock().expect("authn lock");
        inner.accounts.get(username).map(|a| {
            if a.locked_until.is_some_and(|until| until > now) {
                AccountStatus::Locked
            } else {
                AccountStatus::Active
            }
        })
    }

    /// Stage one: credential verification. Success yields a pending login
    /// awaiting the second factor.
    pub fn start_login(
        &self,
        username: &str,
        password: &str,
        context: LoginContext,
        now: i64,
    ) -> Result<PendingHandle, AuthnError> {
        let mut inner = self.inner.lock().expect("authn lock");
        let Some(account) = inner.accounts.get_mut(username) else {
            // burn a comparable verification so unknown users are
            // indistinguishable from wrong passwords
            let _ = verify_password(&self.decoy, password);
            drop(inner);
            self.emit_login_failure(username, &context, "BAD_CREDENTIALS");
            return Err(AuthnError::BadCredentials);
        };

        if account.locked_until.is_some_and(|until| until > now) {
            drop(inner);
            self.emit_login_failure(username, &context, "ACCOUNT_LOCKED");
            return Err(AuthnError::AccountLocked);
        }
        account.locked_until = None;

        if !verify_password(&account.password, password) {
            account.failure_times.push(now);
            let window_start = now - self.cfg.lockout_window_secs;
            account.failure_times.retain(|&t| t > window_start);
            let reason = if account.failure_times.len() as u32 >= self.cfg.lockout_failures {
                account.locked_until = Some(now + self.cfg.lockout_duration_secs);
                account.failure_times.clear();
                "ACCOUNT_LOCKED"
            } else {
                "BAD_CREDENTIALS"
            };
            drop(inner);
            self.emit_login_failure(username, &context, reason);
            return Err(AuthnError::BadCredentials);
        }

        account.failure_times.clear();
        let pending_id = random_hex(16);
        let expires_at = now + self.cfg.pending_ttl_secs;
        inner.pendings.insert(
            pending_id.clone(),
            Pending {
                username: username.to_string(),
                context: context.clone(),
                expires_at,
                attempts_left: self.cfg.pending_max_attempts,
                used: false,
            },
        );
        drop(inner);
        let _ = self.sink.emit(
            EventDraft::new(EventKind::LoginSuccess, username, now)
                .context(event_context(&context))
                .detail("stage", "password"),
        );
        Ok(PendingHandle {
            pending_id,
            expires_at,
        })
    }

    /// Stage two: the soft token. Success consumes the pending login and
    /// issues a bearer session; an unconfirmed enrollment is confirmed by
    /// its first valid code.
    pub fn verify_totp(
        &self,
        pending_id: &str,
        code: &str,
        now: i64,
    ) -> Result<SessionHandle, AuthnError> {
        let mut inner = self.inner.lock().expect("authn lock");

        let outcome = match inner.pendings.get_mut(pending_id) {
            None => Err((AuthnError::PendingExpired, None)),
            Some(p) if p.used => Err((AuthnError::PendingExpired, Some(p.username.clone()))),
            Some(p) if now > p.expires_at => {
                p.used = true;
                Err((AuthnError::PendingExpired, Some(p.username.clone())))
            }
            Some(p) if p.attempts_left == 0 => {
                Err((AuthnError::TooManyAttempts, Some(p.username.clone())))
            }
            Some(p) => Ok((p.username.clone(), p.context.clone())),
        };

        let (username, context) = match outcome {
            Ok(ok) => ok,
            Err((err, who)) => {
                drop(inner);
                self.emit_mfa_failure(who.as_deref().unwrap_or("unknown"), None, err.code(), now);
                return Err(err);
            }
        };

        let account = inner
            .accounts
            .get(&username)
            .expect("pending references account");
        let valid = verify_totp_code(&account.totp_secret, code, now, TOTP_STEP_SECS, TOTP_DIGITS);

        if !valid {
            let pending = inner.pendings.get_mut(pending_id).expect("checked above");
            pending.attempts_left -= 1;
            drop(inner);
            self.emit_mfa_failure(&username, Some(&context), "CODE_INVALID", now);
            return Err(AuthnError::CodeInvalid);
        }

        inner
            .accounts
            .get_mut(&username)
            .expect("checked above")
            .totp_confirmed = true;
        let pending = inner.pendings.get_mut(pending_id).expect("checked above");
        pending.used = true;

        let token = random_hex(32);
        let account = inner.accounts.get(&username).expect("checked above");
        let view = SessionView {
            user_id: account.user_id.clone(),
            username: username.clone(),
            org: account.org.clone(),
            context: context.clone(),
            issued_at: now,
            expires_at: now + self.cfg.session_ttl_secs,
        };
        let handle = SessionHandle {
            token: token.clone(),
            user_id: view.user_id.clone(),
            expires_at: view.expires_at,
        };
        inner.sessions.insert(token_key(&token), Session { view });
        drop(inner);
        let _ = self.sink.emit(
            EventDraft::new(EventKind::LoginSuccess, &username, now)
                .context(event_context(&context))
                .detail("stage", "totp"),
        );
        Ok(handle)
    }

    /// Constant-time by construction: the presented token is hashed and the
    /// digest looked up, so no comparison leaks a prefix.
    pub fn validate_session(&self, token: &str, now: i64) -> Option<SessionView> {
        let inner = self.inner.lock().expect("authn lock");
        inner
            .sessions
            .get(&token_key(token))
            .filter(|s| now < s.view.expires_at)
            .map(|s| s.view.clone())
    }

    fn emit_login_failure(&self, username: &str, context: &LoginContext, reason: &str) {
        let _ = self.sink.emit(
            EventDraft::new(EventKind::LoginFailure, username, context.timestamp)
                .context(event_context(context))
                .detail("reason", reason),
        );
    }

    fn emit_mfa_failure(
        &self,
        principal: &str,
        context: Option<&LoginContext>,
        reason: &str,
        now: i64,
    ) {
        let mut draft =
            EventDraft::new(EventKind::MfaFailure, principal, now).detail("reason", reason);
        if let Some(ctx) = context {
            draft = draft.context(event_context(ctx));
        }
        let _ = self.sink.emit(draft);
    }
}
