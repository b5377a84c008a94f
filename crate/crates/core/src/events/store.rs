//! Durable ordered event log with an in-memory index rebuilt at startup.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use super::event::{decode_record, encode_record, AuditEvent, EventDraft, EventKind};

/// Fields exposed through the familiarity query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownField {
    Ip,
    ServiceId,
}

struct Inner {
    file: File,
    events: Vec<Arc<AuditEvent>>,
    by_principal: HashMap<String, Vec<u32>>,
}

/// Append-only store; iteration order equals append order and sequence
/// numbers are gapless starting at 1.
pub struct EventStore {
    path: PathBuf,
    inner: RwLock<Inner>,
}

impl EventStore {
    /// Opens (or creates) the store, rebuilding the index from the log file.
    /// A truncated trailing record from a crashed writer is discarded.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;

        let mut events = Vec::new();
        let mut by_principal: HashMap<String, Vec<u32>> = HashMap::new();
        let mut offset = 0;
        while offset < buf.len() {
            match decode_record(&buf[offset..]) {
                Some((event, used)) => {
                    let idx = events.len() as u32;
                    by_principal
                        .entry(event.principal.clone())
                        .or_default()
                        .push(idx);
                    events.push(Arc::new(event));
                    offset += used;
                }
                None => break, // torn tail
            }
        }

        Ok(EventStore {
            path,
            inner: RwLock::new(Inner {
                file,
                events,
                by_principal,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event, assigning the next sequence number. The event is
    /// durable only after a subsequent [`EventStore::sync`].
    pub fn append(&self, draft: EventDraft) -> io::Result<u64> {
        let mut inner = self.inner.write().expect("store lock");
        let seq = inner.events.len() as u64 + 1;
        let event = draft.into_event(seq);
        inner.file.write_all(&encode_record(&event))?;
        let idx = inner.events.len() as u32;
        inner
            .by_principal
            .entry(event.principal.clone())
            .or_default()
            .push(idx);
        inner.events.push(Arc::new(event));
        Ok(seq)
    }

    pub fn sync(&self) -> io::Result<()> {
        self.inner.write().expect("store lock").file.sync_data()
    }

    pub fn len(&self) -> u64 {
        self.inner.read().expect("store lock").events.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Events with sequence number strictly greater than `after_seq`.
    pub fn events_after(&self, after_seq: u64, limit: usize) -> Vec<Arc<AuditEvent>> {
        let inner = self.inner.read().expect("store lock");
        inner
            .events
            .iter()
            .skip(after_seq as usize)
            .take(limit)
            .cloned()
            .collect()
    }

    /// Consistent snapshot of one principal's events, in append order.
    pub fn principal_events(&self, principal: &str) -> Vec<Arc<AuditEvent>> {
        let inner = self.inner.read().expect("store lock");
        inner
            .by_principal
            .get(principal)
            .map(|idxs| {
                idxs.iter()
                    .map(|&i| inner.events[i as usize].clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Exact count of matching persisted events in `[t0, t1)`.
    pub fn count(
        &self,
        principal: &str,
        kinds: &[EventKind],
        window: (i64, i64),
        resource_id: Option<&str>,
    ) -> u64 {
        self.principal_events(principal)
            .iter()
            .filter(|e| kinds.contains(&e.kind))
            .filter(|e| e.context.timestamp >= window.0 && e.context.timestamp < window.1)
            .filter(|e| resource_id.is_none() || e.resource_id.as_deref() == resource_id)
            .count() as u64
    }

    /// Highest-sequence event of the given kind for the principal.
    pub fn last(&self, principal: &str, kind: EventKind) -> Option<Arc<AuditEvent>> {
        self.principal_events(principal)
            .into_iter()
            .rev()
            .find(|e| e.kind == kind)
    }

    /// Distinct values of a context field seen for the principal in `[t0, t1)`.
    pub fn known_values(
        &self,
        principal: &str,
        field: KnownField,
        window: (i64, i64),
    ) -> std::collections::HashSet<String> {
        self.principal_events(principal)
            .iter()
            .filter(|e| e.context.timestamp >= window.0 && e.context.timestamp < window.1)
            .filter_map(|e| match field {
                KnownField::Ip => e.context.ip.map(|ip| ip.to_string()),
                KnownField::ServiceId => e.context.service_id.clone(),
            })
            .collect()
    }
}
