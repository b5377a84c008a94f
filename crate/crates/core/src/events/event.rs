//! Audit event records and their on-disk encoding.

use std::collections::BTreeMap;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::policy::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Register,
    LoginSuccess,
    LoginFailure,
    MfaFailure,
    AuthzPermit,
    AuthzDeny,
    Penalty,
    DeviceEnrolled,
    DeviceAuthSuccess,
    DeviceAuthFailure,
    PolicyUpdated,
}

/// Request context captured alongside an event.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventContext {
    pub ip: Option<IpAddr>,
    pub geo: Option<GeoPoint>,
    pub timestamp: i64,
    pub service_id: Option<String>,
}

/// A fully persisted, immutable audit event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    /// Gapless per-store sequence number, assigned at append time.
    pub event_id: u64,
    pub kind: EventKind,
    /// User or device identifier.
    pub principal: String,
    pub resource_id: Option<String>,
    pub context: EventContext,
    pub detail: BTreeMap<String, String>,
}

/// An event before the store assigned its sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDraft {
    pub kind: EventKind,
    pub principal: String,
    pub resource_id: Option<String>,
    pub context: EventContext,
    pub detail: BTreeMap<String, String>,
}

impl EventDraft {
    pub fn new(kind: EventKind, principal: impl Into<String>, timestamp: i64) -> Self {
        EventDraft {
            kind,
            principal: principal.into(),
            resource_id: None,
            context: EventContext {
                timestamp,
                ..EventContext::default()
            },
            detail: BTreeMap::new(),
        }
    }

    pub fn resource(mut self, resource_id: impl Into<String>) -> Self {
        self.resource_id = Some(resource_id.into());
        self
    }

    pub fn context(mut self, context: EventContext) -> Self {
        self.context = context;
        self
    }

    pub fn detail(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.detail.insert(key.into(), value.into());
        self
    }

    pub(crate) fn into_event(self, event_id: u64) -> AuditEvent {
        AuditEvent {
            event_id,
            kind: self.kind,
            principal: self.principal,
            resource_id: self.resource_id,
            context: self.context,
            detail: self.detail,
        }
    }
}

/// Encodes one event as a length-prefixed record: a big-endian u32 byte
/// count followed by the canonical JSON encoding.
pub fn encode_record(event: &AuditEvent) -> Vec<u8> {
    let body = serde_json::to_vec(event).expect("event serialization");
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decodes one length-prefixed record from the front of `buf`. Returns the
/// event and the number of bytes consumed, or `None` for a truncated or
/// malformed record.
pub fn decode_record(buf: &[u8]) -> Option<(AuditEvent, usize)> {
    if buf.len() < 4 {
        return None;
    }
    let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    let body = buf.get(4..4 + len)?;
    let event = serde_json::from_slice(body).ok()?;
    Some((event, 4 + len))
}
