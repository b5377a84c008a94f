//! Route handlers. Each handler extracts context server-side, delegates to
//! the owning core module inside a correlation scope, and maps domain errors
//! onto HTTP statuses with machine-readable codes.

use std::collections::HashMap;
use std::net::{IpAddr, SocketAddr};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::extract::{ConnectInfo, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::Engine;
use rand::RngCore;
use serde::Deserialize;
use serde_json::{json, Value};

use ztiam_core::authn::{extract_context, AuthnError, LoginContext, SessionView};
use ztiam_core::events::{EventContext, EventDraft, EventKind, EventSink};
use ztiam_core::pip::TrustProfile;
use ztiam_core::pki::PkiError;
use ztiam_core::policy::geo::geo_distance_km;
use ztiam_core::policy::{
    evaluate, parse_request_context, serialize_policy_set, AttributeCategory, AttributeValue,
    GeoPoint, PdpDecision, PolicyParseError, RequestContext,
};
use ztiam_core::trust::{
    authorize as run_authorize, combine_decision, determine_mode, normalize_factors, trust_score,
    ProfileRefresher, StoreUnavailable, TrustSignals,
};
use ztiam_core::unix_now;

use crate::state::{with_correlation, AppState};

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/auth/register", post(register))
        .route("/v1/auth/login", post(login))
        .route("/v1/auth/totp", post(totp))
        .route("/v1/authorize", post(authorize))
        .route("/v1/device/enroll", post(device_enroll))
        .route("/v1/device/challenge", post(device_challenge))
        .route("/v1/device/respond", post(device_respond))
        .route("/v1/device/revoke", post(device_revoke))
        .route("/v1/policies", put(put_policies).get(get_policies))
        .route("/v1/trust/{user}", get(trust_view))
        .route("/v1/events/tail", get(events_tail))
        .with_state(state)
}

fn correlation_id() -> String {
    let mut buf = [0u8; 4];
    rand::rngs::OsRng.fill_bytes(&mut buf);
    hex::encode(buf)
}

fn api_error(status: StatusCode, code: &str, message: &str, corr: &str) -> Response {
    (
        status,
        Json(json!({ "error": code, "message": message, "correlation_id": corr })),
    )
        .into_response()
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::to_string)
}

/// Admin routes are guarded by the static bootstrap token from config.
#[allow(clippy::result_large_err)]
fn admin_guard(state: &AppState, headers: &HeaderMap, corr: &str) -> Result<(), Response> {
    let Some(expected) = state.cfg.admin_token.as_deref() else {
        return Err(api_error(
            StatusCode::FORBIDDEN,
            "ADMIN_DISABLED",
            "no admin token configured",
            corr,
        ));
    };
    match bearer(headers) {
        None => Err(api_error(
            StatusCode::UNAUTHORIZED,
            "MISSING_TOKEN",
            "admin bearer token required",
            corr,
        )),
        Some(token) if token == expected => Ok(()),
        Some(_) => Err(api_error(
            StatusCode::FORBIDDEN,
            "NOT_ADMIN",
            "token is not the admin token",
            corr,
        )),
    }
}

#[allow(clippy::result_large_err)]
fn rate_limit(state: &AppState, ip: IpAddr, corr: &str) -> Result<(), Response> {
    if state.limiter.allow(ip) {
        Ok(())
    } else {
        Err(api_error(
            StatusCode::TOO_MANY_REQUESTS,
            "RATE_LIMITED",
            "too many requests from this address",
            corr,
        ))
    }
}

fn request_context(
    state: &AppState,
    peer: SocketAddr,
    headers: &HeaderMap,
    service_id: &str,
    now: i64,
) -> LoginContext {
    let forwarded = headers.get("x-forwarded-for").and_then(|v| v.to_str().ok());
    extract_context(
        peer.ip(),
        forwarded,
        &state.cfg.proxy_allowlist,
        service_id,
        now,
        state.resolver.as_ref(),
    )
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    Json(json!({
        "status": "ok",
        "policy_version": state.policy_snapshot().version,
        "pdp_evaluations": state.pdp_evaluations.load(Ordering::SeqCst),
        "events": state.store.len(),
    }))
    .into_response()
}

#[derive(Deserialize)]
struct RegisterBody {
    username: String,
    password: String,
    org: String,
}

async fn register(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(body): Json<RegisterBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    let now = unix_now();
    let result = with_correlation(&corr, || {
        state
            .authn
            .register(&body.username, &body.password, &body.org, now)
    });
    match result {
        Ok(out) => Json(json!({
            "user_id": out.user_id,
            "username": out.username,
            "org": out.org,
            "provisioning_uri": out.provisioning_uri,
            "correlation_id": corr,
        }))
        .into_response(),
        Err(e) => {
            let status = match e {
                AuthnError::UsernameTaken => StatusCode::CONFLICT,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            };
            api_error(status, e.code(), &e.to_string(), &corr)
        }
    }
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
    #[serde(default = "default_service")]
    service_id: String,
}

fn default_service() -> String {
    "default".into()
}

async fn login(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Json(body): Json<LoginBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = rate_limit(&state, peer.ip(), &corr) {
        return resp;
    }
    let now = unix_now();
    let ctx = request_context(&state, peer, &headers, &body.service_id, now);
    let result = with_correlation(&corr, || {
        state
            .authn
            .start_login(&body.username, &body.password, ctx, now)
    });
    match result {
        Ok(pending) => Json(json!({
            "pending_id": pending.pending_id,
            "expires_at": pending.expires_at,
            "correlation_id": corr,
        }))
        .into_response(),
        Err(e) => api_error(authn_status(&e), e.code(), &e.to_string(), &corr),
    }
}

fn authn_status(e: &AuthnError) -> StatusCode {
    match e {
        AuthnError::AccountLocked => StatusCode::LOCKED,
        AuthnError::TooManyAttempts => StatusCode::TOO_MANY_REQUESTS,
        _ => StatusCode::UNAUTHORIZED,
    }
}

#[derive(Deserialize)]
struct TotpBody {
    pending_id: String,
    code: String,
}

async fn totp(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    Json(body): Json<TotpBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = rate_limit(&state, peer.ip(), &corr) {
        return resp;
    }
    let now = unix_now();
    let result = with_correlation(&corr, || {
        state.authn.verify_totp(&body.pending_id, &body.code, now)
    });
    match result {
        Ok(session) => Json(json!({
            "token": session.token,
            "user_id": session.user_id,
            "expires_at": session.expires_at,
            "correlation_id": corr,
        }))
        .into_response(),
        Err(e) => api_error(authn_status(&e), e.code(), &e.to_string(), &corr),
    }
}

#[derive(Deserialize)]
struct AuthorizeBody {
    #[serde(default)]
    resource: serde_json::Map<String, Value>,
    #[serde(default)]
    action: serde_json::Map<String, Value>,
    #[serde(default)]
    environment: serde_json::Map<String, Value>,
    /// Declared calling service; defaults to the one seen at login.
    service_id: Option<String>,
    /// Present in bodies from confused clients; always ignored — subject
    /// attributes come from the session, never from the request.
    #[serde(default)]
    #[allow(dead_code)]
    subject: Value,
}

async fn authorize(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Json(body): Json<AuthorizeBody>,
) -> Response {
    let corr = correlation_id();
    let now = unix_now();
    let Some(token) = bearer(&headers) else {
        return api_error(
            StatusCode::UNAUTHORIZED,
            "MISSING_TOKEN",
            "bearer session required",
            &corr,
        );
    };
    let Some(view) = state.authn.validate_session(&token, now) else {
        return api_error(
            StatusCode::UNAUTHORIZED,
            "INVALID_SESSION",
            "session unknown or expired",
            &corr,
        );
    };
    let service_id = body
        .service_id
        .clone()
        .unwrap_or_else(|| view.context.service_id.clone());
    let login_ctx = request_context(&state, peer, &headers, &service_id, now);

    let mut doc = serde_json::Map::new();
    let mut environment = body.environment.clone();
    environment.remove("time"); // server-set, never trusted from the body
    doc.insert("resource".into(), Value::Object(body.resource.clone()));
    doc.insert("action".into(), Value::Object(body.action.clone()));
    doc.insert("environment".into(), Value::Object(environment));
    let doc = Value::Object(doc).to_string();

    let mut ctx = match parse_request_context(&doc, now) {
        Ok(ctx) => ctx,
        Err(e) => {
            return api_error(
                StatusCode::BAD_REQUEST,
                "BAD_CONTEXT",
                &e.to_string(),
                &corr,
            )
        }
    };
    inject_subject(&mut ctx, &view, &login_ctx, now);

    let resource_id = match ctx.get(AttributeCategory::Resource, "id") {
        Some(AttributeValue::String(s)) => s.clone(),
        _ => {
            return api_error(
                StatusCode::BAD_REQUEST,
                "MISSING_RESOURCE_ID",
                "resource.id string attribute is required",
                &corr,
            )
        }
    };
    let resource_geo = match ctx.get(AttributeCategory::Resource, "geo") {
        Some(AttributeValue::Geo(g)) => Some(*g),
        _ => None,
    };

    with_correlation(&corr, || {
        decide(
            &state,
            &corr,
            &view,
            &login_ctx,
            ctx,
            &resource_id,
            resource_geo,
            &service_id,
            now,
        )
    })
}

fn inject_subject(ctx: &mut RequestContext, view: &SessionView, login: &LoginContext, now: i64) {
    ctx.insert(
        AttributeCategory::Subject,
        "id",
        AttributeValue::string(&view.username),
    );
    ctx.insert(
        AttributeCategory::Subject,
        "org",
        AttributeValue::string(&view.org),
    );
    ctx.remove(AttributeCategory::Subject, "geo");
    if let Some(geo) = login.geo {
        ctx.insert(AttributeCategory::Subject, "geo", AttributeValue::Geo(geo));
    }
    ctx.insert(
        AttributeCategory::Environment,
        "time",
        AttributeValue::Time(now),
    );
}

fn build_signals(
    profile: &TrustProfile,
    login: &LoginContext,
    resource_id: &str,
    resource_geo: Option<GeoPoint>,
    service_id: &str,
    now: i64,
) -> TrustSignals {
    let distance_km = match (login.geo, resource_geo) {
        (Some(a), Some(b)) => Some(geo_distance_km(a, b)),
        _ => None,
    };
    let hour = (now.rem_euclid(86_400) / 3600) as u8;
    TrustSignals {
        request_time: now,
        service_id: service_id.to_string(),
        ip: login.ip,
        geo: login.geo,
        distance_km,
        prior_requests_same_resource: profile
            .per_resource_success
            .get(resource_id)
            .copied()
            .unwrap_or(0),
        prior_successful_authz_total: profile.total_successful_authz,
        penalties_in_window: profile.penalties_in_window,
        ip_seen_before: profile.known_ips.contains(&login.ip.to_string()),
        service_seen_before: profile.known_services.contains(service_id),
        time_in_usual_band: profile.usual_hours.contains(&hour),
        // a bearer session exists only after password + TOTP succeeded
        mfa_verified_this_session: true,
    }
}

#[allow(clippy::too_many_arguments)]
fn decide(
    state: &AppState,
    corr: &str,
    view: &SessionView,
    login_ctx: &LoginContext,
    ctx: RequestContext,
    resource_id: &str,
    resource_geo: Option<GeoPoint>,
    service_id: &str,
    now: i64,
) -> Response {
    let event_ctx = EventContext {
        ip: Some(login_ctx.ip),
        geo: login_ctx.geo,
        timestamp: now,
        service_id: Some(service_id.to_string()),
    };

    let profile = match state.pip.get(&view.username, now, &state.trust_cfg) {
        Ok(p) => p,
        Err(StoreUnavailable) => {
            emit_outcome(
                state,
                &view.username,
                resource_id,
                &event_ctx,
                false,
                false,
                now,
            );
            return (
                StatusCode::SERVICE_UNAVAILABLE,
                Json(json!({
                    "decision": "DENY",
                    "reasons": ["STORE_UNAVAILABLE"],
                    "correlation_id": corr,
                })),
            )
                .into_response();
        }
    };
    let signals = build_signals(
        &profile,
        login_ctx,
        resource_id,
        resource_geo,
        service_id,
        now,
    );

    // one snapshot for the whole request: both PDP evaluations of a retry
    // see the same policy version
    let policy = state.policy_snapshot();
    let mut pdp = || -> PdpDecision {
        state.pdp_evaluations.fetch_add(1, Ordering::SeqCst);
        evaluate(&policy, &ctx)
    };
    let mut effects = ProfileRefresher(|| {
        let fresh = state
            .pip
            .force_refresh(&view.username, now, &state.trust_cfg)?;
        let signals = build_signals(
            &fresh,
            login_ctx,
            resource_id,
            resource_geo,
            service_id,
            now,
        );
        Ok(((*fresh).clone(), signals))
    });

    let decision = run_authorize(
        &ctx,
        &signals,
        &profile,
        resource_id,
        &state.trust_cfg,
        &mut pdp,
        &mut effects,
    );
    let store_unavailable = decision.reasons.iter().any(|r| r == "STORE_UNAVAILABLE");
    emit_outcome(
        state,
        &view.username,
        resource_id,
        &event_ctx,
        decision.allowed(),
        !store_unavailable,
        now,
    );
    let status = if store_unavailable {
        StatusCode::SERVICE_UNAVAILABLE
    } else {
        StatusCode::OK
    };
    (
        status,
        Json(json!({
            "decision": if decision.allowed() { "ALLOW" } else { "DENY" },
            "mode": decision.mode_used,
            "pdp": decision.pdp,
            "score": decision.score,
            "reasons": decision.reasons,
            "pdp_evaluations": decision.pdp_evaluations,
            "policy_version": policy.version,
            "correlation_id": corr,
        })),
    )
        .into_response()
}

/// A permit is one event; a deny is a deny record plus the penalty that
/// depresses future trust. Denies caused by an attribute-store outage are
/// not penalized — the failure is the infrastructure's, not the principal's.
fn emit_outcome(
    state: &AppState,
    username: &str,
    resource_id: &str,
    event_ctx: &EventContext,
    allowed: bool,
    attributable: bool,
    now: i64,
) {
    let kind = if allowed {
        EventKind::AuthzPermit
    } else {
        EventKind::AuthzDeny
    };
    let _ = state.sink.emit(
        EventDraft::new(kind, username, now)
            .resource(resource_id)
            .context(event_ctx.clone()),
    );
    if !allowed && attributable {
        let _ = state.sink.emit(
            EventDraft::new(EventKind::Penalty, username, now)
                .resource(resource_id)
                .context(event_ctx.clone()),
        );
    }
}

#[derive(Deserialize)]
struct EnrollBody {
    device_id: String,
    public_key_pem: String,
    #[serde(default = "default_validity_days")]
    validity_days: u32,
}

fn default_validity_days() -> u32 {
    365
}

async fn device_enroll(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(body): Json<EnrollBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    let now = unix_now();
    let result = with_correlation(&corr, || {
        state.pki.enroll_device(
            &body.device_id,
            &body.public_key_pem,
            body.validity_days,
            now,
        )
    });
    match result {
        Ok(identity) => Json(json!({
            "device_id": identity.device_id,
            "certificate_pem": identity.certificate_pem,
            "serial": identity.serial,
            "ca_cert_pem": state.pki.ca_cert_pem().ok(),
            "correlation_id": corr,
        }))
        .into_response(),
        Err(e) => api_error(pki_status(&e), e.code(), &e.to_string(), &corr),
    }
}

fn pki_status(e: &PkiError) -> StatusCode {
    match e {
        PkiError::DuplicateDevice => StatusCode::CONFLICT,
        PkiError::MalformedKey => StatusCode::UNPROCESSABLE_ENTITY,
        PkiError::UnknownDevice | PkiError::UnknownSerial => StatusCode::NOT_FOUND,
        PkiError::Keystore(_) | PkiError::Generation(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNAUTHORIZED,
    }
}

#[derive(Deserialize)]
struct ChallengeBody {
    device_id: String,
}

async fn device_challenge(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    Json(body): Json<ChallengeBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = rate_limit(&state, peer.ip(), &corr) {
        return resp;
    }
    let now = unix_now();
    let result = with_correlation(&corr, || state.pki.create_challenge(&body.device_id, now));
    match result {
        Ok(ch) => Json(json!({
            "challenge_id": ch.challenge_id,
            "nonce": base64::engine::general_purpose::STANDARD.encode(&ch.nonce),
            "expires_at": ch.expires_at,
            "correlation_id": corr,
        }))
        .into_response(),
        Err(e) => api_error(pki_status(&e), e.code(), &e.to_string(), &corr),
    }
}

#[derive(Deserialize)]
struct RespondBody {
    challenge_id: String,
    /// base64 Ed25519 signature over the raw nonce bytes.
    signature: String,
}

async fn device_respond(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    Json(body): Json<RespondBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = rate_limit(&state, peer.ip(), &corr) {
        return resp;
    }
    let Ok(signature) = base64::engine::general_purpose::STANDARD.decode(&body.signature) else {
        return api_error(
            StatusCode::BAD_REQUEST,
            "BAD_SIGNATURE_ENCODING",
            "signature must be base64",
            &corr,
        );
    };
    let now = unix_now();
    let result = with_correlation(&corr, || {
        state
            .pki
            .verify_challenge_response(&body.challenge_id, &signature, now)
    });
    match result {
        Ok(session) => Json(json!({
            "token": session.token,
            "device_id": session.device_id,
            "expires_at": session.expires_at,
            "correlation_id": corr,
        }))
        .into_response(),
        Err(e) => api_error(pki_status(&e), e.code(), &e.to_string(), &corr),
    }
}

#[derive(Deserialize)]
struct RevokeBody {
    serial: u64,
    #[serde(default)]
    reason: String,
}

async fn device_revoke(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(body): Json<RevokeBody>,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    let now = unix_now();
    let result = with_correlation(&corr, || state.pki.revoke(body.serial, &body.reason, now));
    match result {
        Ok(()) => Json(json!({ "serial": body.serial, "correlation_id": corr })).into_response(),
        Err(e) => api_error(pki_status(&e), e.code(), &e.to_string(), &corr),
    }
}

async fn put_policies(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    document: String,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    match state.install_policy(&document) {
        Ok(version) => {
            let now = unix_now();
            let _ = with_correlation(&corr, || {
                state.sink.emit(
                    EventDraft::new(EventKind::PolicyUpdated, "admin", now)
                        .detail("version", version.to_string()),
                )
            });
            Json(json!({
                "policy_set_id": state.policy_snapshot().policy_set_id,
                "version": version,
                "correlation_id": corr,
            }))
            .into_response()
        }
        Err(e) => api_error(
            StatusCode::UNPROCESSABLE_ENTITY,
            policy_error_code(&e),
            &e.to_string(),
            &corr,
        ),
    }
}

fn policy_error_code(e: &PolicyParseError) -> &'static str {
    match e {
        PolicyParseError::Syntax { .. } => "SYNTAX",
        PolicyParseError::UnknownFunction { .. } => "UNKNOWN_FUNCTION",
        PolicyParseError::ArityMismatch { .. } => "ARITY_MISMATCH",
        PolicyParseError::TypeMismatch { .. } => "TYPE_MISMATCH",
        PolicyParseError::DuplicateId { .. } => "DUPLICATE_ID",
    }
}

async fn get_policies(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    let set = state.policy_snapshot();
    Json(json!({
        "policy_set_id": set.policy_set_id,
        "version": set.version,
        "document": serialize_policy_set(&set),
        "correlation_id": corr,
    }))
    .into_response()
}

/// What-if inspection: the stored profile plus the factors, score, mode,
/// and decision-table outcomes the given hypothetical request would see.
/// Read-only — nothing is emitted or cached.
async fn trust_view(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    Path(user): Path<String>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    let now = unix_now();
    let profile = match state.pip.get(&user, now, &state.trust_cfg) {
        Ok(p) => p,
        Err(StoreUnavailable) => {
            return api_error(
                StatusCode::SERVICE_UNAVAILABLE,
                "STORE_UNAVAILABLE",
                "attribute store unavailable",
                &corr,
            )
        }
    };

    let ip: IpAddr = params
        .get("ip")
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| peer.ip());
    let service_id = params
        .get("service_id")
        .cloned()
        .unwrap_or_else(default_service);
    let resource = params.get("resource").cloned().unwrap_or_default();
    let geo = state.resolver.resolve(ip);
    let mut signals = build_signals(
        &profile,
        &LoginContext {
            ip,
            geo,
            timestamp: now,
            service_id: service_id.clone(),
        },
        &resource,
        None,
        &service_id,
        now,
    );
    signals.distance_km = params.get("distance_km").and_then(|s| s.parse().ok());

    let factors = normalize_factors(&signals, &state.trust_cfg);
    let score = trust_score(&factors, &state.trust_cfg);
    let mode = determine_mode(&profile, &resource, now, &state.trust_cfg);
    let outcomes: serde_json::Map<String, Value> = [
        PdpDecision::Permit,
        PdpDecision::Deny,
        PdpDecision::Indeterminate,
        PdpDecision::NotApplicable,
    ]
    .into_iter()
    .map(|d| {
        let outcome = combine_decision(d, score, state.trust_cfg.threshold);
        (d.to_string(), json!(format!("{outcome:?}")))
    })
    .collect();

    Json(json!({
        "user_id": user,
        "profile": &*profile,
        "factors": factors,
        "score": score,
        "threshold": state.trust_cfg.threshold,
        "mode": mode,
        "outcomes": outcomes,
        "correlation_id": corr,
    }))
    .into_response()
}

#[derive(Deserialize)]
struct TailParams {
    #[serde(default)]
    after: u64,
    #[serde(default = "default_tail_limit")]
    limit: usize,
}

fn default_tail_limit() -> usize {
    1000
}

/// Streams persisted audit events after a sequence number, one JSON record
/// per line.
async fn events_tail(
    State(state): State<Arc<AppState>>,
    Query(params): Query<TailParams>,
    headers: HeaderMap,
) -> Response {
    let corr = correlation_id();
    if let Err(resp) = admin_guard(&state, &headers, &corr) {
        return resp;
    }
    state.log.flush();
    let events = state
        .store
        .events_after(params.after, params.limit.min(10_000));
    let mut body = String::new();
    for e in events {
        body.push_str(&serde_json::to_string(&*e).expect("event serialization"));
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}
