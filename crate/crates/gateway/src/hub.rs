//! Fan-out of events to connected clients.
//!
//! Every event gets the next global sequence number. Ordinary events go to a
//! bounded per-client queue; a client whose queue is full is disconnected.
//! Robot state goes through a latest-wins slot so slow clients see the newest
//! snapshot instead of a backlog.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use tokio::sync::{mpsc, watch};

use crate::protocol::{EventBody, EventMessage};

pub const CLIENT_BUFFER: usize = 1024;

pub type ClientId = u64;

/// A serialized event.
#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub seq: u64,
    pub kind: &'static str,
    pub text: Arc<str>,
}

pub struct Subscription {
    pub id: ClientId,
    pub events: mpsc::Receiver<Outgoing>,
    pub state: watch::Receiver<Option<Outgoing>>,
}

struct Inner {
    next_seq: u64,
    next_id: ClientId,
    clients: HashMap<ClientId, mpsc::Sender<Outgoing>>,
    dropped: Vec<ClientId>,
}

pub struct Hub {
    inner: Mutex<Inner>,
    state: watch::Sender<Option<Outgoing>>,
    capacity: usize,
}

impl Default for Hub {
    fn default() -> Self {
        Self::with_capacity(CLIENT_BUFFER)
    }
}

impl Hub {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                next_seq: 0,
                next_id: 0,
                clients: HashMap::new(),
                dropped: Vec::new(),
            }),
            state: watch::channel(None).0,
            capacity: capacity.max(1),
        }
    }

    pub fn subscribe(&self) -> Subscription {
        let (tx, rx) = mpsc::channel(self.capacity);
        let mut inner = self.inner.lock().unwrap();
        let id = inner.next_id;
        inner.next_id += 1;
        inner.clients.insert(id, tx);
        let mut state = self.state.subscribe();
        // A new client starts from the next snapshot, not a stale one.
        state.mark_unchanged();
        Subscription {
            id,
            events: rx,
            state,
        }
    }

    pub fn unsubscribe(&self, id: ClientId) {
        self.inner.lock().unwrap().clients.remove(&id);
    }

    pub fn client_count(&self) -> usize {
        self.inner.lock().unwrap().clients.len()
    }

    /// Clients disconnected for overflow since the last call.
    pub fn take_dropped(&self) -> Vec<ClientId> {
        std::mem::take(&mut self.inner.lock().unwrap().dropped)
    }

    fn encode(seq: u64, tick: u64, body: EventBody) -> Outgoing {
        let kind = body.kind();
        let msg = EventMessage { seq, tick, body };
        let text = serde_json::to_string(&msg).expect("events serialize");
        Outgoing {
            seq,
            kind,
            text: text.into(),
        }
    }

    fn deliver(inner: &mut Inner, id: ClientId, out: Outgoing) {
        let Some(tx) = inner.clients.get(&id) else {
            return;
        };
        match tx.try_send(out) {
            Ok(()) => {}
            Err(mpsc::error::TrySendError::Full(_)) => {
                inner.clients.remove(&id);
                inner.dropped.push(id);
            }
            Err(mpsc::error::TrySendError::Closed(_)) => {
                inner.clients.remove(&id);
            }
        }
    }

    /// Sends `body` to every client and returns its sequence number.
    pub fn broadcast(&self, tick: u64, body: EventBody) -> u64 {
        let mut inner = self.inner.lock().unwrap();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let out = Self::encode(seq, tick, body);
        let ids: Vec<ClientId> = inner.clients.keys().copied().collect();
        for id in ids {
            Self::deliver(&mut inner, id, out.clone());
        }
        seq
    }

    /// Sends `body` to one client.
    pub fn send_to(&self, id: ClientId, tick: u64, body: EventBody) -> u64 {
        let mut inner = self.inner.lock().unwrap();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let out = Self::encode(seq, tick, body);
        Self::deliver(&mut inner, id, out);
        seq
    }

    /// Publishes a robot snapshot to the latest-wins slot.
    pub fn publish_state(&self, tick: u64, body: EventBody) -> u64 {
        // Hold the lock so the slot never goes backwards relative to queued events.
        let mut inner = self.inner.lock().unwrap();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        self.state.send_replace(Some(Self::encode(seq, tick, body)));
        seq
    }
}

/// Merges a client's queue and state slot into one stream ordered by
/// sequence number. Returns `None` once the client has been disconnected.
pub struct ClientStream {
    sub: Subscription,
    held: Option<Outgoing>,
    pending_state: Option<Outgoing>,
}

impl ClientStream {
    pub fn new(sub: Subscription) -> Self {
        Self {
            sub,
            held: None,
            pending_state: None,
        }
    }

    pub fn id(&self) -> ClientId {
        self.sub.id
    }

    fn refresh_state(&mut self) {
        if self.sub.state.has_changed().unwrap_or(false) {
            self.pending_state = self.sub.state.borrow_and_update().clone();
        }
    }

    pub async fn next(&mut self) -> Option<Outgoing> {
        loop {
            // Every event queued before a snapshot was published has a smaller
            // sequence number, so it is already visible here.
            self.refresh_state();
            let event = match self.held.take() {
                Some(e) => Some(e),
                None => match self.sub.events.try_recv() {
                    Ok(e) => Some(e),
                    Err(mpsc::error::TryRecvError::Empty) => None,
                    Err(mpsc::error::TryRecvError::Disconnected) => return None,
                },
            };
            match (event, self.pending_state.take()) {
                (Some(e), Some(s)) if s.seq < e.seq => {
                    self.held = Some(e);
                    return Some(s);
                }
                (Some(e), s) => {
                    self.pending_state = s;
                    return Some(e);
                }
                (None, Some(s)) => return Some(s),
                (None, None) => {}
            }
            tokio::select! {
                ev = self.sub.events.recv() => match ev {
                    Some(e) => self.held = Some(e),
                    None => return None,
                },
                changed = self.sub.state.changed() => {
                    if changed.is_err() {
                        return None;
                    }
                    self.pending_state = self.sub.state.borrow_and_update().clone();
                }
            }
        }
    }
}
