//! Policy Information Point: aggregates the audit log into per-user trust
//! profiles, cached with a bounded staleness.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::events::{AuditEvent, EventKind, EventStore};
use crate::trust::{StoreUnavailable, TrustConfig};

/// Aggregated behavioral snapshot for one user, as of `as_of`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustProfile {
    pub user_id: String,
    pub as_of: i64,
    /// All-time successful authorizations.
    pub total_successful_authz: u64,
    /// Successful authorizations per resource within the trailing cycle.
    pub per_resource_success: BTreeMap<String, u64>,
    /// Penalties within the trailing penalty window.
    pub penalties_in_window: u64,
    /// Distinct source IPs within the penalty window.
    pub known_ips: BTreeSet<String>,
    /// Distinct client services within the penalty window.
    pub known_services: BTreeSet<String>,
    pub last_login_at: Option<i64>,
    /// Hours of day with at least three historical successful logins.
    pub usual_hours: BTreeSet<u8>,
    /// Resources ever granted to this user.
    pub first_granted: BTreeSet<String>,
}

impl TrustProfile {
    pub fn empty(user_id: impl Into<String>, as_of: i64) -> Self {
        TrustProfile {
            user_id: user_id.into(),
            as_of,
            total_successful_authz: 0,
            per_resource_success: BTreeMap::new(),
            penalties_in_window: 0,
            known_ips: BTreeSet::new(),
            known_services: BTreeSet::new(),
            last_login_at: None,
            usual_hours: BTreeSet::new(),
            first_granted: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipConfig {
    pub refresh_interval_secs: i64,
    pub staleness_bound_secs: i64,
}

impl Default for PipConfig {
    fn default() -> Self {
        PipConfig {
            refresh_interval_secs: 60,
            staleness_bound_secs: 120,
        }
    }
}

impl PipConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.refresh_interval_secs <= 0 {
            return Err("pip.refresh_interval must be positive".into());
        }
        if self.staleness_bound_secs < self.refresh_interval_secs {
            return Err("pip.staleness_bound must be >= pip.refresh_interval".into());
        }
        Ok(())
    }
}

/// Source of per-principal event snapshots. Abstracted so outages can be
/// simulated and external stores substituted.
pub trait EventQuerySource: Send + Sync {
    /// A consistent snapshot of one principal's events in append order.
    fn principal_events(&self, principal: &str) -> Result<Vec<Arc<AuditEvent>>, StoreUnavailable>;
}

impl EventQuerySource for EventStore {
    fn principal_events(&self, principal: &str) -> Result<Vec<Arc<AuditEvent>>, StoreUnavailable> {
        Ok(EventStore::principal_events(self, principal))
    }
}

/// Wrapper that can simulate an unreachable store.
pub struct FaultableSource<S> {
    inner: S,
    down: AtomicBool,
}

impl<S> FaultableSource<S> {
    pub fn new(inner: S) -> Self {
        FaultableSource {
            inner,
            down: AtomicBool::new(false),
        }
    }

    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::SeqCst);
    }
}

impl<S: EventQuerySource> EventQuerySource for FaultableSource<S> {
    fn principal_events(&self, principal: &str) -> Result<Vec<Arc<AuditEvent>>, StoreUnavailable> {
        if self.down.load(Ordering::SeqCst) {
            return Err(StoreUnavailable);
        }
        self.inner.principal_events(principal)
    }
}

impl<S: EventQuerySource + ?Sized> EventQuerySource for Arc<S> {
    fn principal_events(&self, principal: &str) -> Result<Vec<Arc<AuditEvent>>, StoreUnavailable> {
        (**self).principal_events(principal)
    }
}

struct Cached {
    profile: Arc<TrustProfile>,
    fetched_at: i64,
    stale: bool,
}

/// The PIP cache. Snapshots are immutable; replacement is atomic under the
/// lock, so concurrent readers always see one whole snapshot.
pub struct Pip {
    source: Arc<dyn EventQuerySource>,
    cfg: PipConfig,
    cache: RwLock<HashMap<String, Cached>>,
}

impl Pip {
    pub fn new(source: Arc<dyn EventQuerySource>, cfg: PipConfig) -> Self {
        Pip {
            source,
            cfg,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> PipConfig {
        self.cfg
    }

    /// Recomputes the profile from the event log and atomically replaces the
    /// cached snapshot. On a store outage the previous snapshot is kept and
    /// flagged stale.
    pub fn refresh(
        &self,
        user_id: &str,
        now: i64,
        trust_cfg: &TrustConfig,
    ) -> Result<Arc<TrustProfile>, StoreUnavailable> {
        match self.source.principal_events(user_id) {
            Ok(events) => {
                let profile = Arc::new(aggregate(user_id, &events, now, trust_cfg));
                let mut cache = self.cache.write().expect("pip lock");
                let entry = cache.entry(user_id.to_string()).or_insert_with(|| Cached {
                    profile: profile.clone(),
                    fetched_at: now,
                    stale: false,
                });
                // keep the later snapshot under concurrent refreshes
                if now >= entry.fetched_at {
                    *entry = Cached {
                        profile: profile.clone(),
                        fetched_at: now,
                        stale: false,
                    };
                    Ok(profile)
                } else {
                    Ok(entry.profile.clone())
                }
            }
            Err(StoreUnavailable) => {
                let mut cache = self.cache.write().expect("pip lock");
                match cache.get_mut(user_id) {
                    Some(entry) => {
                        entry.stale = true;
                        Ok(entry.profile.clone())
                    }
                    None => Err(StoreUnavailable),
                }
            }
        }
    }

    /// Returns the cached snapshot while fresh, refreshing synchronously
    /// once it ages past the staleness bound.
    pub fn get(
        &self,
        user_id: &str,
        now: i64,
        trust_cfg: &TrustConfig,
    ) -> Result<Arc<TrustProfile>, StoreUnavailable> {
        {
            let cache = self.cache.read().expect("pip lock");
            if let Some(entry) = cache.get(user_id) {
                if !entry.stale && now - entry.fetched_at <= self.cfg.staleness_bound_secs {
                    return Ok(entry.profile.clone());
                }
            }
        }
        self.refresh(user_id, now, trust_cfg)
    }

    /// Refresh bypassing the interval; the single-retry path uses this to
    /// force current attributes.
    pub fn force_refresh(
        &self,
        user_id: &str,
        now: i64,
        trust_cfg: &TrustConfig,
    ) -> Result<Arc<TrustProfile>, StoreUnavailable> {
        match self.source.principal_events(user_id) {
            Ok(events) => {
                let profile = Arc::new(aggregate(user_id, &events, now, trust_cfg));
                let mut cache = self.cache.write().expect("pip lock");
                let replace = cache
                    .get(user_id)
                    .map(|entry| now >= entry.fetched_at)
                    .unwrap_or(true);
                if replace {
                    cache.insert(
                        user_id.to_string(),
                        Cached {
                            profile: profile.clone(),
                            fetched_at: now,
                            stale: false,
                        },
                    );
                }
                Ok(profile)
            }
            Err(StoreUnavailable) => Err(StoreUnavailable),
        }
    }
}

/// Number of successful logins per hour bucket needed before that hour
/// counts as usual for the user.
const USUAL_HOURS_MIN_LOGINS: u64 = 3;

fn aggregate(
    user_id: &str,
    events: &[Arc<AuditEvent>],
    now: i64,
    cfg: &TrustConfig,
) -> TrustProfile {
    let mut profile = TrustProfile::empty(user_id, now);
    let cycle_start = now - cfg.cycle_secs;
    let penalty_start = now - cfg.penalty_window_secs;
    let mut hour_counts: HashMap<u8, u64> = HashMap::new();

    for e in events {
        let ts = e.context.timestamp;
        match e.kind {
            EventKind::AuthzPermit => {
                profile.total_successful_authz += 1;
                if let Some(res) = &e.resource_id {
                    profile.first_granted.insert(res.clone());
                    if ts > cycle_start && ts <= now {
                        *profile.per_resource_success.entry(res.clone()).or_insert(0) += 1;
                    }
                }
            }
            // a failed MFA attempt is itself a penalty source; no separate
            // Penalty record accompanies it
            EventKind::Penalty | EventKind::MfaFailure => {
                if ts > penalty_start && ts <= now {
                    profile.penalties_in_window += 1;
                }
            }
            // the password stage logs its own LoginSuccess; only the
            // completed second factor counts as a login here
            EventKind::LoginSuccess
                if e.detail.get("stage").map(String::as_str) != Some("password") =>
            {
                profile.last_login_at = Some(ts);
                let hour = (ts.rem_euclid(86_400) / 3600) as u8;
                *hour_counts.entry(hour).or_insert(0) += 1;
            }
            _ => {}
        }
        if ts > penalty_start && ts <= now {
            if let Some(ip) = e.context.ip {
                profile.known_ips.insert(ip.to_string());
            }
            if let Some(svc) = &e.context.service_id {
                profile.known_services.insert(svc.clone());
            }
        }
    }

    profile.usual_hours = hour_counts
        .into_iter()
        .filter(|(_, n)| *n >= USUAL_HOURS_MIN_LOGINS)
        .map(|(h, _)| h)
        .collect();
    profile
}
