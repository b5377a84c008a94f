//! Asynchronous emission: producers enqueue onto a bounded channel, a single
//! consumer drains to the store preserving order.

use std::sync::mpsc::{self, Receiver, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;

use thiserror::Error;

use super::event::EventDraft;
use super::store::EventStore;

/// Backpressure signal: a full queue rejects rather than dropping audit
/// records.
#[derive(Debug, Error)]
#[error("audit queue full")]
pub struct QueueFull;

/// Anything that accepts audit events.
pub trait EventSink: Send + Sync {
    fn emit(&self, draft: EventDraft) -> Result<(), QueueFull>;
}

enum Msg {
    Event(EventDraft),
    Flush(SyncSender<()>),
}

/// Bounded in-process queue in front of the durable store. The consumer is
/// abstracted behind [`EventSink`], so an external broker adapter can
/// replace this without touching producers.
pub struct EventLog {
    tx: SyncSender<Msg>,
    store: Arc<EventStore>,
    consumer: Option<JoinHandle<()>>,
}

impl EventLog {
    pub const DEFAULT_CAPACITY: usize = 4096;

    pub fn new(store: Arc<EventStore>, capacity: usize) -> Self {
        Self::with_gate(store, capacity, None)
    }

    /// As [`EventLog::new`], but the consumer waits on `gate` before
    /// draining anything. Used by tests to observe backpressure.
    pub fn with_gate(store: Arc<EventStore>, capacity: usize, gate: Option<Receiver<()>>) -> Self {
        let (tx, rx) = mpsc::sync_channel::<Msg>(capacity);
        let consumer_store = store.clone();
        let consumer = std::thread::Builder::new()
            .name("audit-consumer".into())
            .spawn(move || {
                if let Some(gate) = gate {
                    let _ = gate.recv();
                }
                consume(rx, consumer_store)
            })
            .expect("spawn audit consumer");
        EventLog {
            tx,
            store,
            consumer: Some(consumer),
        }
    }

    pub fn store(&self) -> &Arc<EventStore> {
        &self.store
    }

    /// Returns after enqueue, before durability.
    pub fn emit(&self, draft: EventDraft) -> Result<(), QueueFull> {
        match self.tx.try_send(Msg::Event(draft)) {
            Ok(()) => Ok(()),
            Err(TrySendError::Full(_)) => Err(QueueFull),
            Err(TrySendError::Disconnected(_)) => Err(QueueFull),
        }
    }

    /// Blocks until every previously enqueued event is persisted and synced.
    pub fn flush(&self) {
        let (ack_tx, ack_rx) = mpsc::sync_channel(1);
        if self.tx.send(Msg::Flush(ack_tx)).is_ok() {
            let _ = ack_rx.recv();
        }
    }
}

impl Drop for EventLog {
    fn drop(&mut self) {
        // closing the channel stops the consumer after it drains
        let (tx, _) = mpsc::sync_channel(1);
        drop(std::mem::replace(&mut self.tx, tx));
        if let Some(handle) = self.consumer.take() {
            let _ = handle.join();
        }
    }
}

impl EventSink for EventLog {
    fn emit(&self, draft: EventDraft) -> Result<(), QueueFull> {
        EventLog::emit(self, draft)
    }
}

fn consume(rx: Receiver<Msg>, store: Arc<EventStore>) {
    while let Ok(msg) = rx.recv() {
        match msg {
            Msg::Event(draft) => {
                // an append failure here would lose audit data; surface loudly
                if let Err(e) = store.append(draft) {
                    eprintln!("audit append failed: {e}");
                }
            }
            Msg::Flush(ack) => {
                if let Err(e) = store.sync() {
                    eprintln!("audit sync failed: {e}");
                }
                let _ = ack.send(());
            }
        }
    }
    let _ = store.sync();
}
