//! Append-only audit/event stream: a bounded asynchronous queue draining
//! into a durable store, plus the windowed queries the PIP aggregates from.

mod event;
mod log;
mod store;

pub use event::{decode_record, encode_record, AuditEvent, EventContext, EventDraft, EventKind};
pub use log::{EventLog, EventSink, QueueFull};
pub use store::{EventStore, KnownField};
