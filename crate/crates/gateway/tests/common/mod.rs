//! Shared harness: a real gateway on an ephemeral port, driven over HTTP.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use serde_json::Value;
use ztiam_core::config::ServiceConfig;
use ztiam_gateway::{serve_plain, AppState, RateLimiter};

pub const ADMIN: &str = "admintok-for-tests";
pub const MASTER_KEY: [u8; 32] = [7u8; 32];

/// Config with the loopback peer geolocated in Novi Sad, a trusted proxy
/// header for impersonating arbitrary source IPs, and an admin token.
pub fn test_config(data_dir: &std::path::Path) -> ServiceConfig {
    let text = format!(
        r#"
listen = "127.0.0.1:0"
data_dir = "{}"
admin_token = "{ADMIN}"
proxy_allowlist = ["127.0.0.1"]

[geo]
"127.0.0.1" = [45.2671, 19.8335]
"203.0.113.7" = [45.2671, 19.8335]
"#,
        data_dir.display()
    );
    ServiceConfig::parse(&text).expect("test config")
}

pub struct TestServer {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    _dir: tempfile::TempDir,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl TestServer {
    pub fn start() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let cfg = test_config(dir.path());
        // generous limiter: rate-limit behavior has its own dedicated server
        let resolver = Arc::new(ztiam_core::authn::StaticGeoResolver::new(cfg.geo_table()));
        let state = AppState::with_parts(
            cfg,
            &MASTER_KEY,
            resolver,
            RateLimiter::new(10_000.0, 100_000.0),
        )
        .expect("state");
        Self::start_with(state, dir)
    }

    pub fn start_limited(rate: f64, burst: f64) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let cfg = test_config(dir.path());
        let resolver = Arc::new(ztiam_core::authn::StaticGeoResolver::new(cfg.geo_table()));
        let state = AppState::with_parts(cfg, &MASTER_KEY, resolver, RateLimiter::new(rate, burst))
            .expect("state");
        Self::start_with(state, dir)
    }

    fn start_with(state: Arc<AppState>, dir: tempfile::TempDir) -> Self {
        let (addr_tx, addr_rx) = std::sync::mpsc::sync_channel(1);
        let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
        let serve_state = state.clone();
        let handle = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
                    .await
                    .expect("bind");
                addr_tx
                    .send(listener.local_addr().expect("local addr"))
                    .expect("send addr");
                tokio::select! {
                    r = serve_plain(serve_state, listener) => r.expect("serve"),
                    _ = shutdown_rx => {}
                }
            });
        });
        let addr = addr_rx.recv().expect("server addr");
        TestServer {
            addr,
            state,
            _dir: dir,
            shutdown: Some(shutdown_tx),
            handle: Some(handle),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Issues a request and collapses transport/status errors into (status, body).
pub fn call(req: ureq::Request, body: Option<Value>) -> (u16, Value) {
    let result = match body {
        Some(v) => req.send_json(v),
        None => req.call(),
    };
    match result {
        Ok(resp) => {
            let status = resp.status();
            let text = resp.into_string().expect("response body");
            let json = serde_json::from_str(&text).unwrap_or(Value::String(text));
            (status, json)
        }
        Err(ureq::Error::Status(status, resp)) => {
            let text = resp.into_string().expect("error body");
            let json = serde_json::from_str(&text).unwrap_or(Value::String(text));
            (status, json)
        }
        Err(e) => panic!("transport error: {e}"),
    }
}

pub fn post(server: &TestServer, path: &str, token: Option<&str>, body: Value) -> (u16, Value) {
    let mut req = ureq::post(&server.url(path));
    if let Some(t) = token {
        req = req.set("authorization", &format!("Bearer {t}"));
    }
    call(req, Some(body))
}

pub fn get(server: &TestServer, path: &str, token: Option<&str>) -> (u16, Value) {
    let mut req = ureq::get(&server.url(path));
    if let Some(t) = token {
        req = req.set("authorization", &format!("Bearer {t}"));
    }
    call(req, None)
}

pub fn put_raw(server: &TestServer, path: &str, token: Option<&str>, body: &str) -> (u16, Value) {
    let mut req = ureq::put(&server.url(path));
    if let Some(t) = token {
        req = req.set("authorization", &format!("Bearer {t}"));
    }
    match req.send_string(body) {
        Ok(resp) => {
            let status = resp.status();
            let json = resp.into_json().expect("json body");
            (status, json)
        }
        Err(ureq::Error::Status(status, resp)) => {
            let json = resp.into_json().expect("json error body");
            (status, json)
        }
        Err(e) => panic!("transport error: {e}"),
    }
}

pub const PASSWORD: &str = "a sixteen char password";

/// Registers a user and completes the two-stage login; returns the bearer
/// session token.
pub fn register_and_login(server: &TestServer, username: &str, org: &str) -> String {
    let (status, body) = post(
        server,
        "/v1/auth/register",
        Some(ADMIN),
        serde_json::json!({ "username": username, "password": PASSWORD, "org": org }),
    );
    assert_eq!(status, 200, "register: {body}");
    let secret = secret_from_uri(body["provisioning_uri"].as_str().unwrap());
    login(server, username, &secret)
}

pub fn login(server: &TestServer, username: &str, secret: &[u8]) -> String {
    let (status, body) = post(
        server,
        "/v1/auth/login",
        None,
        serde_json::json!({ "username": username, "password": PASSWORD }),
    );
    assert_eq!(status, 200, "login: {body}");
    let pending_id = body["pending_id"].as_str().unwrap().to_string();
    let code = ztiam_core::authn::totp_code(secret, ztiam_core::unix_now(), 30, 6);
    let (status, body) = post(
        server,
        "/v1/auth/totp",
        None,
        serde_json::json!({ "pending_id": pending_id, "code": code }),
    );
    assert_eq!(status, 200, "totp: {body}");
    body["token"].as_str().unwrap().to_string()
}

pub fn secret_from_uri(uri: &str) -> Vec<u8> {
    let b32 = uri
        .split("secret=")
        .nth(1)
        .unwrap()
        .split('&')
        .next()
        .unwrap();
    base32::decode(base32::Alphabet::Rfc4648 { padding: false }, b32).unwrap()
}

pub const GEO_READ_POLICY: &str = include_str!("../../../../policies/geo-read.policy");

pub fn install_geo_policy(server: &TestServer) -> u64 {
    let (status, body) = put_raw(server, "/v1/policies", Some(ADMIN), GEO_READ_POLICY);
    assert_eq!(status, 200, "policy install: {body}");
    body["version"].as_u64().unwrap()
}

/// A READ request against a same-org resource located at the given point.
pub fn read_request(org: &str, geo: [f64; 2]) -> Value {
    serde_json::json!({
        "resource": {
            "id": { "type": "string", "v": "res-1" },
            "org": { "type": "string", "v": org },
            "geo": { "type": "geo", "v": geo },
        },
        "action": { "id": { "type": "string", "v": "READ" } },
    })
}

/// Belgrade: about 72 km from the Novi Sad loopback geo entry.
pub const BELGRADE: [f64; 2] = [44.7866, 20.4489];
/// Roughly 200 km north of the Novi Sad loopback entry, well outside the
/// 100 km perimeter.
pub const OUT_OF_PERIMETER: [f64; 2] = [47.0, 19.5];
