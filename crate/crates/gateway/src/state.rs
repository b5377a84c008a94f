//! Shared service state wired together from the core modules.

use std::cell::RefCell;
use std::sync::atomic::AtomicU64;
use std::sync::{Arc, RwLock};

use anyhow::Context;
use ztiam_core::authn::{AuthnConfig, AuthnService, GeoResolver, StaticGeoResolver};
use ztiam_core::config::ServiceConfig;
use ztiam_core::events::{EventDraft, EventLog, EventSink, EventStore, QueueFull};
use ztiam_core::pip::{EventQuerySource, FaultableSource, Pip};
use ztiam_core::pki::{CertAuthority, Keystore};
use ztiam_core::policy::{parse_policy_set, PolicySet};
use ztiam_core::trust::TrustConfig;
use ztiam_core::unix_now;

use crate::ratelimit::RateLimiter;

thread_local! {
    static CORRELATION: RefCell<Option<String>> = const { RefCell::new(None) };
}

/// Runs `f` with the request's correlation id visible to every event sink
/// on this thread. The core services run synchronously inside the handler,
/// so everything they emit inherits the id.
pub(crate) fn with_correlation<T>(id: &str, f: impl FnOnce() -> T) -> T {
    CORRELATION.with(|c| *c.borrow_mut() = Some(id.to_string()));
    let out = f();
    CORRELATION.with(|c| *c.borrow_mut() = None);
    out
}

/// Sink wrapper stamping the active request's correlation id into every
/// emitted event.
pub struct CorrelatedSink(pub Arc<EventLog>);

impl EventSink for CorrelatedSink {
    fn emit(&self, mut draft: EventDraft) -> Result<(), QueueFull> {
        if let Some(id) = CORRELATION.with(|c| c.borrow().clone()) {
            draft.detail.insert("correlation_id".into(), id);
        }
        self.0.emit(draft)
    }
}

/// The active policy set plus its PAP-assigned version. Swapped atomically
/// as one unit, so a request pinning the `Arc` never sees a mixture.
pub(crate) struct PolicyState {
    pub set: Arc<PolicySet>,
}

pub struct AppState {
    pub cfg: ServiceConfig,
    pub trust_cfg: TrustConfig,
    pub log: Arc<EventLog>,
    pub store: Arc<EventStore>,
    /// Query-path fault injection point; the durable store itself stays up.
    pub faults: Arc<FaultableSource<Arc<EventStore>>>,
    pub pip: Pip,
    pub authn: AuthnService,
    pub pki: CertAuthority,
    pub sink: Arc<CorrelatedSink>,
    pub resolver: Arc<dyn GeoResolver>,
    pub limiter: RateLimiter,
    /// Total PDP evaluations served; lets tests observe that no decision
    /// was ever answered from a cache.
    pub pdp_evaluations: AtomicU64,
    pub(crate) policy: RwLock<PolicyState>,
}

impl AppState {
    /// Wires the full service from config. The resolver defaults to the
    /// config's static geo table.
    pub fn new(cfg: ServiceConfig, master_key: &[u8; 32]) -> anyhow::Result<Arc<Self>> {
        let resolver = Arc::new(StaticGeoResolver::new(cfg.geo_table()));
        Self::with_parts(cfg, master_key, resolver, RateLimiter::new(10.0, 20.0))
    }

    pub fn with_parts(
        cfg: ServiceConfig,
        master_key: &[u8; 32],
        resolver: Arc<dyn GeoResolver>,
        limiter: RateLimiter,
    ) -> anyhow::Result<Arc<Self>> {
        cfg.validate().context("config rejected")?;
        let trust_cfg = cfg.trust_config().context("trust config rejected")?;
        std::fs::create_dir_all(&cfg.data_dir).context("create data dir")?;

        let store = Arc::new(
            EventStore::open(cfg.data_dir.join("events.log")).context("open event store")?,
        );
        let log = Arc::new(EventLog::new(store.clone(), cfg.queue_capacity));
        let sink = Arc::new(CorrelatedSink(log.clone()));

        let faults = Arc::new(FaultableSource::new(store.clone()));
        let pip = Pip::new(
            faults.clone() as Arc<dyn EventQuerySource>,
            cfg.pip_config(),
        );

        let keystore = Arc::new(
            Keystore::open(cfg.data_dir.join("keys.ztks"), master_key).context("open keystore")?,
        );
        let pki = CertAuthority::open(keystore, sink.clone())?;
        if pki.ca_cert_pem().is_err() {
            pki.init_ca("ztiam device ca", 10, false, unix_now())?;
        }

        let authn = AuthnService::new(AuthnConfig::default(), sink.clone());
        let policy = RwLock::new(PolicyState {
            set: load_policy(&cfg)?,
        });

        Ok(Arc::new(AppState {
            cfg,
            trust_cfg,
            log,
            store,
            faults,
            pip,
            authn,
            pki,
            sink,
            resolver,
            limiter,
            pdp_evaluations: AtomicU64::new(0),
            policy,
        }))
    }

    pub fn policy_snapshot(&self) -> Arc<PolicySet> {
        self.policy.read().expect("policy lock").set.clone()
    }

    /// Validates, versions, persists, and atomically installs a new policy
    /// document. Returns the new version.
    pub fn install_policy(
        &self,
        document: &str,
    ) -> Result<u64, ztiam_core::policy::PolicyParseError> {
        let parsed = parse_policy_set(document)?;
        let mut guard = self.policy.write().expect("policy lock");
        let version = guard.set.version + 1;
        let mut set = parsed;
        set.version = version;
        let on_disk = serde_json::json!({ "version": version, "document": document });
        // persistence is best-effort; the installed version is authoritative
        let _ = std::fs::write(
            self.cfg.data_dir.join("policies.json"),
            serde_json::to_vec_pretty(&on_disk).expect("serialize policy record"),
        );
        guard.set = Arc::new(set);
        Ok(version)
    }
}

fn load_policy(cfg: &ServiceConfig) -> anyhow::Result<Arc<PolicySet>> {
    let path = cfg.data_dir.join("policies.json");
    if !path.exists() {
        return Ok(Arc::new(PolicySet::empty("bootstrap")));
    }
    let raw = std::fs::read_to_string(&path).context("read stored policy")?;
    let record: serde_json::Value = serde_json::from_str(&raw).context("parse stored policy")?;
    let version = record["version"]
        .as_u64()
        .context("stored policy version")?;
    let document = record["document"]
        .as_str()
        .context("stored policy document")?;
    let mut set =
        parse_policy_set(document).map_err(|e| anyhow::anyhow!("stored policy invalid: {e}"))?;
    set.version = version;
    Ok(Arc::new(set))
}
