//! Conformance suite: one test per acceptance criterion, each printing a
//! single PASS line (visible with `--nocapture`) once its assertions hold.

mod common;

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use ztiam_core::authn::{totp_code, verify_totp_code};
use ztiam_core::events::{
    EventContext, EventDraft, EventKind, EventSink, EventStore, KnownField, QueueFull,
};
use ztiam_core::pip::{Pip, PipConfig, TrustProfile};
use ztiam_core::pki::{CertAuthority, DeviceKey, Keystore, PkiError};
use ztiam_core::policy::geo::geo_distance_km;
use ztiam_core::policy::{combine, CombiningAlgorithm, GeoPoint, PdpDecision, RequestContext};
use ztiam_core::trust::{
    authorize, combine_decision, determine_mode, normalize_factors, trust_score,
    CombinationOutcome, EvaluationMode, ProfileRefresher, StoreUnavailable, TrustConfig,
    TrustFactors, TrustSignals, TrustWeights,
};
use ztiam_core::unix_now;

use common::{
    get, install_geo_policy, post, register_and_login, TestServer, ADMIN, BELGRADE,
    OUT_OF_PERIMETER,
};

fn pass(n: u32, what: &str) {
    println!("ACCEPTANCE {n:02} PASS — {what}");
}

const NOVI_SAD: [f64; 2] = [45.2671, 19.8335];

fn clean_signals(now: i64) -> TrustSignals {
    TrustSignals {
        request_time: now,
        service_id: "default".into(),
        ip: "203.0.113.7".parse().unwrap(),
        geo: None,
        distance_km: Some(10.0),
        prior_requests_same_resource: 0,
        prior_successful_authz_total: 0,
        penalties_in_window: 0,
        ip_seen_before: false,
        service_seen_before: false,
        time_in_usual_band: false,
        mfa_verified_this_session: true,
    }
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_01_decision_table_is_exhaustive_and_exact() {
    use PdpDecision::*;
    let theta = 0.6;
    // every (decision, score-side) cell, including the inclusive boundary
    for &score in &[0.0, 0.3, theta - 1e-9, theta, theta + 1e-9, 1.0] {
        let high = score >= theta;
        for &pdp in &[Permit, Deny, Indeterminate, NotApplicable] {
            let expected = match (pdp, high) {
                (Permit, true) => CombinationOutcome::Allow,
                (Indeterminate, true) => CombinationOutcome::Reevaluate,
                _ => CombinationOutcome::Deny,
            };
            assert_eq!(
                combine_decision(pdp, score, theta),
                expected,
                "pdp {pdp:?} score {score}"
            );
        }
    }
    pass(
        1,
        "decision table exact for all PDP values on both sides of the threshold",
    );
}

// ---------------------------------------------------------------- criterion 2

/// Independent distance oracle: spherical law of cosines, deliberately a
/// different formulation than the production haversine.
fn oracle_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (p1, l1) = (a[0].to_radians(), a[1].to_radians());
    let (p2, l2) = (b[0].to_radians(), b[1].to_radians());
    let cos = p1.sin() * p2.sin() + p1.cos() * p2.cos() * (l2 - l1).cos();
    6371.0 * cos.clamp(-1.0, 1.0).acos()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-9)
}

#[test]
fn criterion_02_geo_scenario_end_to_end() {
    // distances agree with the independent oracle within 0.5%
    let to_belgrade = geo_distance_km(
        GeoPoint::new(NOVI_SAD[0], NOVI_SAD[1]).unwrap(),
        GeoPoint::new(BELGRADE[0], BELGRADE[1]).unwrap(),
    );
    let to_outside = geo_distance_km(
        GeoPoint::new(NOVI_SAD[0], NOVI_SAD[1]).unwrap(),
        GeoPoint::new(OUT_OF_PERIMETER[0], OUT_OF_PERIMETER[1]).unwrap(),
    );
    assert!(rel_close(to_belgrade, oracle_km(NOVI_SAD, BELGRADE), 0.005));
    assert!(rel_close(
        to_outside,
        oracle_km(NOVI_SAD, OUT_OF_PERIMETER),
        0.005
    ));
    assert!((70.0..75.0).contains(&to_belgrade), "{to_belgrade}");
    assert!(to_outside > 100.0, "{to_outside}");

    let server = TestServer::start();
    install_geo_policy(&server);

    // within the 100 km perimeter: ALLOW
    let maria = register_and_login(&server, "maria", "acme");
    let (status, body) = post(
        &server,
        "/v1/authorize",
        Some(&maria),
        common::read_request("acme", BELGRADE),
    );
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["decision"], "ALLOW", "{body}");

    // outside the perimeter: DENY
    let (status, body) = post(
        &server,
        "/v1/authorize",
        Some(&maria),
        common::read_request("acme", OUT_OF_PERIMETER),
    );
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["decision"], "DENY", "{body}");

    // an established user whose source has no geolocation: the PDP comes
    // back Indeterminate, the combination asks for re-evaluation, the single
    // forced refresh changes nothing, and the request is denied
    let now = unix_now();
    for i in 0..50i64 {
        let mut d = EventDraft::new(EventKind::AuthzPermit, "nikola", now - 3600 + i);
        d.context = EventContext {
            ip: Some("198.51.100.9".parse().unwrap()),
            geo: None,
            timestamp: now - 3600 + i,
            service_id: Some("default".into()),
        };
        server.state.store.append(d.resource("res-1")).unwrap();
    }
    let nikola = register_and_login(&server, "nikola", "acme");
    let req = ureq::post(&server.url("/v1/authorize"))
        .set("authorization", &format!("Bearer {nikola}"))
        .set("x-forwarded-for", "198.51.100.9");
    let (status, body) = common::call(req, Some(common::read_request("acme", BELGRADE)));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["decision"], "DENY", "{body}");
    assert_eq!(body["mode"], "SCORE_BASED", "{body}");
    assert_eq!(body["pdp"], "INDETERMINATE", "{body}");
    assert_eq!(body["pdp_evaluations"], 2, "{body}");
    let reasons: Vec<&str> = body["reasons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_str().unwrap())
        .collect();
    assert!(reasons.contains(&"REEVALUATED"), "{reasons:?}");
    assert!(reasons.contains(&"REEVALUATION_EXHAUSTED"), "{reasons:?}");

    pass(
        2,
        "geo scenario: ~72 km ALLOW, ~194 km DENY, missing geo re-evaluates once then denies",
    );
}

// ---------------------------------------------------------------- criterion 3

fn combine_oracle(decisions: &[PdpDecision], alg: CombiningAlgorithm) -> PdpDecision {
    use PdpDecision::*;
    let order: [PdpDecision; 3] = match alg {
        CombiningAlgorithm::DenyOverrides => [Deny, Indeterminate, Permit],
        CombiningAlgorithm::PermitOverrides => [Permit, Indeterminate, Deny],
        CombiningAlgorithm::FirstApplicable => {
            return decisions
                .iter()
                .copied()
                .find(|d| *d != NotApplicable)
                .unwrap_or(NotApplicable)
        }
    };
    order
        .into_iter()
        .find(|d| decisions.contains(d))
        .unwrap_or(NotApplicable)
}

#[test]
fn criterion_03_combining_algorithms_match_brute_force() {
    use PdpDecision::*;
    let alphabet = [Permit, Deny, Indeterminate, NotApplicable];
    let mut lists: Vec<Vec<PdpDecision>> = vec![vec![]];
    let mut layer: Vec<Vec<PdpDecision>> = vec![vec![]];
    for _ in 0..4 {
        layer = layer
            .iter()
            .flat_map(|l| {
                alphabet.iter().map(move |d| {
                    let mut next = l.clone();
                    next.push(*d);
                    next
                })
            })
            .collect();
        lists.extend(layer.clone());
    }
    let mut cases = 0;
    for list in &lists {
        for alg in CombiningAlgorithm::ALL {
            assert_eq!(
                combine(list.iter().copied(), alg),
                combine_oracle(list, alg),
                "list {list:?} alg {alg:?}"
            );
            cases += 1;
        }
    }
    assert!(cases >= 768, "covered {cases} cases");
    pass(
        3,
        "combining algorithms agree with the brute-force oracle on all decision lists",
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_04_totp_reference_vectors_and_window() {
    let secret = b"12345678901234567890";
    let vectors: &[(i64, &str)] = &[
        (59, "94287082"),
        (1_111_111_109, "07081804"),
        (1_111_111_111, "14050471"),
        (1_234_567_890, "89005924"),
        (2_000_000_000, "69279037"),
        (20_000_000_000, "65353130"),
    ];
    for &(t, expected) in vectors {
        assert_eq!(totp_code(secret, t, 30, 8), expected, "t = {t}");
    }
    // adjacent windows accepted, two steps away rejected
    let now = 1_111_111_111;
    for t in [now - 30, now, now + 30] {
        let code = totp_code(secret, t, 30, 6);
        assert!(
            verify_totp_code(secret, &code, now, 30, 6),
            "offset {}",
            t - now
        );
    }
    for t in [now - 60, now + 60] {
        let code = totp_code(secret, t, 30, 6);
        assert!(
            !verify_totp_code(secret, &code, now, 30, 6),
            "offset {}",
            t - now
        );
    }
    pass(
        4,
        "TOTP matches the published reference vectors and accepts exactly a ±1 step window",
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_trust_score_randomized_properties() {
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
    let worked = TrustFactors {
        f_geo: 1.0,
        f_res: 0.5,
        f_hist: 0.8,
        f_pen: 1.0,
        f_meta: 0.0,
    };
    assert!((trust_score(&worked, &cfg) - 0.72).abs() < 1e-12);

    let mut rng = StdRng::seed_from_u64(0x5eed_5c0e);
    for _ in 0..10_000 {
        let raw: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.01..1.0));
        let sum: f64 = raw.iter().sum();
        let cfg = TrustConfig {
            weights: TrustWeights {
                geo: raw[0] / sum,
                res: raw[1] / sum,
                hist: raw[2] / sum,
                pen: raw[3] / sum,
                meta: raw[4] / sum,
            },
            ..Default::default()
        };
        let f = TrustFactors {
            f_geo: rng.gen_range(0.0..=1.0),
            f_res: rng.gen_range(0.0..=1.0),
            f_hist: rng.gen_range(0.0..=1.0),
            f_pen: rng.gen_range(0.0..=1.0),
            f_meta: rng.gen_range(0.0..=1.0),
        };
        let s = trust_score(&f, &cfg);
        assert!(
            (-1e-12..=1.0 + 1e-12).contains(&s),
            "score {s} out of range"
        );

        // bumping any one factor never lowers the score
        let mut bumped = f;
        let slot = match rng.gen_range(0..5) {
            0 => &mut bumped.f_geo,
            1 => &mut bumped.f_res,
            2 => &mut bumped.f_hist,
            3 => &mut bumped.f_pen,
            _ => &mut bumped.f_meta,
        };
        *slot = (*slot + rng.gen_range(0.0..=1.0)).min(1.0);
        assert!(trust_score(&bumped, &cfg) + 1e-12 >= s);
    }
    pass(
        5,
        "10,000 randomized weightings: score bounded, monotone, exact at the extremes",
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_mode_state_machine() {
    let cfg = TrustConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(EventStore::open(dir.path().join("events.log")).unwrap());
    let pip = Pip::new(store.clone(), PipConfig::default());
    let now = unix_now();

    let success =
        |res: &str, ts: i64| EventDraft::new(EventKind::AuthzPermit, "alice", ts).resource(res);

    // promotion happens at exactly promote_n in-window successes
    for i in 0..cfg.promote_n as i64 {
        let p = pip.force_refresh("alice", now, &cfg).unwrap();
        assert_eq!(
            determine_mode(&p, "res-1", now, &cfg),
            EvaluationMode::Criteria,
            "after {i} successes"
        );
        store.append(success("res-1", now - 600 + i)).unwrap();
    }
    let p = pip.force_refresh("alice", now, &cfg).unwrap();
    assert_eq!(
        determine_mode(&p, "res-1", now, &cfg),
        EvaluationMode::ScoreBased
    );

    // a resource this user never touched stays in criteria mode
    assert_eq!(
        determine_mode(&p, "res-2", now, &cfg),
        EvaluationMode::Criteria
    );

    // demotion happens at exactly demote_penalties in-window penalties
    for i in 0..cfg.demote_penalties as i64 {
        let p = pip.force_refresh("alice", now, &cfg).unwrap();
        assert_eq!(
            determine_mode(&p, "res-1", now, &cfg),
            EvaluationMode::ScoreBased,
            "after {i} penalties"
        );
        store
            .append(EventDraft::new(EventKind::Penalty, "alice", now - 300 + i))
            .unwrap();
    }
    let p = pip.force_refresh("alice", now, &cfg).unwrap();
    assert_eq!(
        determine_mode(&p, "res-1", now, &cfg),
        EvaluationMode::Criteria
    );

    // successes on another user's log never leak across principals
    store
        .append({
            let mut d = EventDraft::new(EventKind::AuthzPermit, "bob", now).resource("res-1");
            d.context.timestamp = now;
            d
        })
        .unwrap();
    let p = pip.force_refresh("bob", now, &cfg).unwrap();
    assert_eq!(
        determine_mode(&p, "res-1", now, &cfg),
        EvaluationMode::Criteria
    );

    // successes outside the trailing cycle do not count toward promotion
    for i in 0..20i64 {
        store
            .append(success("res-9", now - cfg.cycle_secs - 100 + i))
            .unwrap();
    }
    let p = pip.force_refresh("carol", now, &cfg).unwrap();
    assert_eq!(
        determine_mode(&p, "res-9", now, &cfg),
        EvaluationMode::Criteria
    );

    pass(
        6,
        "mode transitions: promote at the exact success count, demote on penalties, per-resource",
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_07_zero_trust_structural_properties() {
    let server = TestServer::start();
    install_geo_policy(&server);

    // no session token exists before both factors complete
    let (status, body) = post(
        &server,
        "/v1/auth/register",
        Some(ADMIN),
        json!({ "username": "dana", "password": common::PASSWORD, "org": "acme" }),
    );
    assert_eq!(status, 200, "{body}");
    let (status, body) = post(
        &server,
        "/v1/auth/login",
        None,
        json!({ "username": "dana", "password": common::PASSWORD }),
    );
    assert_eq!(status, 200, "{body}");
    assert!(
        body.get("token").is_none(),
        "password alone must not yield a session: {body}"
    );
    let pending = body["pending_id"].as_str().unwrap().to_string();

    // a pending id is not a session
    let (status, _) = post(
        &server,
        "/v1/authorize",
        Some(&pending),
        common::read_request("acme", BELGRADE),
    );
    assert_eq!(status, 401);

    // a wrong second factor yields no session either
    let (status, body) = post(
        &server,
        "/v1/auth/totp",
        None,
        json!({ "pending_id": pending, "code": "000000" }),
    );
    assert!(status == 401, "{status} {body}");
    assert!(body.get("token").is_none());

    // the PDP's word is final: Deny and NotApplicable never become ALLOW,
    // whatever the trust evidence says
    let now = unix_now();
    let mut profile = TrustProfile::empty("dana", now);
    profile.first_granted.insert("res-1".into());
    profile.per_resource_success.insert("res-1".into(), 100);
    profile.total_successful_authz = 100;
    let mut perfect = clean_signals(now);
    perfect.prior_requests_same_resource = 100;
    perfect.prior_successful_authz_total = 100;
    perfect.ip_seen_before = true;
    perfect.service_seen_before = true;
    perfect.time_in_usual_band = true;
    let cfg = TrustConfig::default();
    let ctx = RequestContext::new(now);
    for pdp in [PdpDecision::Deny, PdpDecision::NotApplicable] {
        // score mode with a perfect score
        let d = authorize(
            &ctx,
            &perfect,
            &profile,
            "res-1",
            &cfg,
            &mut || pdp,
            &mut ProfileRefresher(|| Err(StoreUnavailable)),
        );
        assert!(!d.allowed(), "pdp {pdp:?} allowed in score mode");
        assert!(trust_score(&normalize_factors(&perfect, &cfg), &cfg) > cfg.threshold);
        // criteria mode with a passing gate
        let fresh = TrustProfile::empty("dana", now);
        let d = authorize(
            &ctx,
            &clean_signals(now),
            &fresh,
            "res-1",
            &cfg,
            &mut || pdp,
            &mut ProfileRefresher(|| Err(StoreUnavailable)),
        );
        assert!(!d.allowed(), "pdp {pdp:?} allowed in criteria mode");
    }

    // identical requests are decided fresh every time
    let token = register_and_login(&server, "erik", "acme");
    let count = |server: &TestServer| {
        let (_, h) = get(server, "/healthz", None);
        h["pdp_evaluations"].as_u64().unwrap()
    };
    let before = count(&server);
    for _ in 0..3 {
        let (status, body) = post(
            &server,
            "/v1/authorize",
            Some(&token),
            common::read_request("acme", BELGRADE),
        );
        assert_eq!(status, 200, "{body}");
    }
    assert_eq!(
        count(&server),
        before + 3,
        "a cached decision would skip PDP evaluations"
    );

    // attribute store outage fails closed
    let frida = register_and_login(&server, "frida", "acme");
    server.state.faults.set_down(true);
    let (status, body) = post(
        &server,
        "/v1/authorize",
        Some(&frida),
        common::read_request("acme", BELGRADE),
    );
    server.state.faults.set_down(false);
    assert_eq!(status, 503, "{body}");
    assert_eq!(body["decision"], "DENY", "{body}");
    assert!(body["reasons"]
        .as_array()
        .unwrap()
        .iter()
        .any(|r| r == "STORE_UNAVAILABLE"));

    pass(
        7,
        "structural: MFA gates sessions, PDP deny is final, no caching, outages fail closed",
    );
}

// ---------------------------------------------------------------- criterion 8

struct Discard;
impl EventSink for Discard {
    fn emit(&self, _draft: EventDraft) -> Result<(), QueueFull> {
        Ok(())
    }
}

fn fresh_ca(dir: &std::path::Path, key: &[u8; 32], now: i64) -> CertAuthority {
    let ks = Arc::new(Keystore::open(dir.join("keys.ztks"), key).unwrap());
    let ca = CertAuthority::open(ks, Arc::new(Discard)).unwrap();
    ca.init_ca("acceptance ca", 5, false, now).unwrap();
    ca
}

#[test]
fn criterion_08_pki_suite() {
    let now = unix_now();
    let dir = tempfile::tempdir().unwrap();
    let ca = fresh_ca(dir.path(), &[1u8; 32], now);

    let key = DeviceKey::generate();
    let identity = ca
        .enroll_device("laptop-1", &key.public_key_pem(), 30, now)
        .unwrap();
    assert!(ca.verify_cert_chain(&identity.certificate_pem, now).is_ok());

    // tampering with the certificate body breaks verification
    let pos = identity.certificate_pem.rfind('A').unwrap();
    let mut tampered = identity.certificate_pem.clone().into_bytes();
    tampered[pos] = b'B';
    let tampered = String::from_utf8(tampered).unwrap();
    assert!(ca.verify_cert_chain(&tampered, now).is_err());

    // expired and not-yet-valid certificates are rejected
    assert!(ca
        .verify_cert_chain(&identity.certificate_pem, now + 31 * 86_400)
        .is_err());
    assert!(ca
        .verify_cert_chain(&identity.certificate_pem, now - 86_400)
        .is_err());

    // a certificate issued by a different authority is foreign here
    let foreign_dir = tempfile::tempdir().unwrap();
    let foreign_ca = fresh_ca(foreign_dir.path(), &[2u8; 32], now);
    let foreign_key = DeviceKey::generate();
    let foreign = foreign_ca
        .enroll_device("laptop-1", &foreign_key.public_key_pem(), 30, now)
        .unwrap();
    assert!(ca.verify_cert_chain(&foreign.certificate_pem, now).is_err());

    // challenge-response: a valid signature authenticates once, a replay of
    // the same challenge fails even with the same valid signature
    let challenge = ca.create_challenge("laptop-1", now).unwrap();
    let signature = key.sign(&challenge.nonce);
    let session = ca
        .verify_challenge_response(&challenge.challenge_id, &signature, now)
        .unwrap();
    assert!(ca
        .validate_device_session(&session.token, now + 1)
        .is_some());
    match ca.verify_challenge_response(&challenge.challenge_id, &signature, now) {
        Err(PkiError::ChallengeReused) => {}
        other => panic!("replay must fail with ChallengeReused, got {other:?}"),
    }
    // a signature from the wrong key never authenticates
    let challenge = ca.create_challenge("laptop-1", now).unwrap();
    let wrong = foreign_key.sign(&challenge.nonce);
    assert!(matches!(
        ca.verify_challenge_response(&challenge.challenge_id, &wrong, now),
        Err(PkiError::BadSignature)
    ));

    // revocation is immediate
    ca.revoke(identity.serial, "lost device", now).unwrap();
    assert!(ca
        .verify_cert_chain(&identity.certificate_pem, now)
        .is_err());
    assert!(matches!(
        ca.create_challenge("laptop-1", now),
        Err(PkiError::DeviceRevoked)
    ));

    // keystore: random payloads survive a reopen; one flipped byte in the
    // sealed file is detected
    let ks_path = dir.path().join("sealed.ztks");
    let mut rng = StdRng::seed_from_u64(42);
    let payloads: Vec<Vec<u8>> = (0..8)
        .map(|_| (0..rng.gen_range(1..512)).map(|_| rng.gen()).collect())
        .collect();
    {
        let ks = Keystore::open(&ks_path, &[3u8; 32]).unwrap();
        for (i, p) in payloads.iter().enumerate() {
            ks.put(&format!("secret-{i}"), p).unwrap();
        }
    }
    let ks = Keystore::open(&ks_path, &[3u8; 32]).unwrap();
    for (i, p) in payloads.iter().enumerate() {
        assert_eq!(ks.get(&format!("secret-{i}")).as_ref(), Some(p));
    }
    drop(ks);
    let mut raw = std::fs::read(&ks_path).unwrap();
    let pos = raw.iter().rposition(|&b| b == b'A').unwrap();
    raw[pos] = b'B';
    std::fs::write(&ks_path, &raw).unwrap();
    assert!(Keystore::open(&ks_path, &[3u8; 32]).is_err());

    pass(
        8,
        "PKI: tamper/expiry/revocation/foreign-issuer rejection, challenge replay, sealed store",
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_event_log_durability_and_query_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let kinds = [
        EventKind::AuthzPermit,
        EventKind::AuthzDeny,
        EventKind::LoginSuccess,
        EventKind::Penalty,
    ];
    let mut rng = StdRng::seed_from_u64(9);

    let mut mirror: Vec<EventDraft> = Vec::new();
    {
        let store = EventStore::open(&path).unwrap();
        for _ in 0..200 {
            let ts = rng.gen_range(0i64..1000);
            let mut d = EventDraft::new(
                kinds[rng.gen_range(0..kinds.len())],
                format!("user-{}", rng.gen_range(0..4)),
                ts,
            );
            d.context = EventContext {
                ip: Some(
                    format!("203.0.113.{}", rng.gen_range(1..5))
                        .parse()
                        .unwrap(),
                ),
                geo: None,
                timestamp: ts,
                service_id: Some(format!("svc-{}", rng.gen_range(0..3))),
            };
            if rng.gen_bool(0.7) {
                d = d.resource(format!("res-{}", rng.gen_range(0..3)));
            }
            store.append(d.clone()).unwrap();
            mirror.push(d);
        }
        store.sync().unwrap();
    }

    // restart: everything acknowledged before the drop is still there, in
    // order, with gapless sequence numbers
    let store = EventStore::open(&path).unwrap();
    assert_eq!(store.len(), mirror.len() as u64);
    let all = store.events_after(0, usize::MAX);
    for (i, (e, d)) in all.iter().zip(&mirror).enumerate() {
        assert_eq!(e.event_id, i as u64 + 1);
        assert_eq!(e.kind, d.kind);
        assert_eq!(e.principal, d.principal);
        assert_eq!(e.resource_id, d.resource_id);
        assert_eq!(e.context, d.context);
    }

    // randomized queries against a brute-force scan of the mirror
    for _ in 0..300 {
        let principal = format!("user-{}", rng.gen_range(0..5));
        let t0 = rng.gen_range(0i64..1000);
        let window = (t0, t0 + rng.gen_range(0i64..1000));
        let query_kinds: Vec<EventKind> = kinds
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.5))
            .collect();
        let resource = if rng.gen_bool(0.5) {
            Some(format!("res-{}", rng.gen_range(0..4)))
        } else {
            None
        };
        let expected = mirror
            .iter()
            .filter(|d| d.principal == principal)
            .filter(|d| query_kinds.contains(&d.kind))
            .filter(|d| d.context.timestamp >= window.0 && d.context.timestamp < window.1)
            .filter(|d| resource.is_none() || d.resource_id == resource)
            .count() as u64;
        assert_eq!(
            store.count(&principal, &query_kinds, window, resource.as_deref()),
            expected
        );

        let kind = kinds[rng.gen_range(0..kinds.len())];
        let expected_last = mirror
            .iter()
            .rfind(|d| d.principal == principal && d.kind == kind)
            .map(|d| d.context.timestamp);
        assert_eq!(
            store.last(&principal, kind).map(|e| e.context.timestamp),
            expected_last
        );

        let expected_ips: std::collections::HashSet<String> = mirror
            .iter()
            .filter(|d| d.principal == principal)
            .filter(|d| d.context.timestamp >= window.0 && d.context.timestamp < window.1)
            .filter_map(|d| d.context.ip.map(|ip| ip.to_string()))
            .collect();
        assert_eq!(
            store.known_values(&principal, KnownField::Ip, window),
            expected_ips
        );
    }

    pass(
        9,
        "event log survives a restart intact and queries match a full-scan oracle",
    );
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_end_to_end_latency() {
    let server = TestServer::start();
    install_geo_policy(&server);
    let started = std::time::Instant::now();
    let token = register_and_login(&server, "gavril", "acme");
    let (status, body) = post(
        &server,
        "/v1/authorize",
        Some(&token),
        common::read_request("acme", BELGRADE),
    );
    let elapsed = started.elapsed();
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["decision"], "ALLOW", "{body}");
    assert!(
        elapsed < std::time::Duration::from_secs(2),
        "flow took {elapsed:?}"
    );
    pass(
        10,
        "register → login → second factor → authorize completes in under two seconds",
    );
}
