use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::topology::{ChangeEvent, NodeId};

/// Virtual time, unitless.
pub type Tick = u64;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind<M> {
    Deliver { msg: M, from: NodeId, to: NodeId },
    TimerFire { owner: NodeId, timer: u64 },
    ChurnTick,
    RoundStart(NodeId),
    /// A predetermined topology change, for scripted scenarios.
    Scripted(ChangeEvent),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<M> {
    pub at: Tick,
    pub seq: u64,
    pub kind: EventKind<M>,
}

struct Entry<M>(Event<M>);

impl<M> Entry<M> {
    fn key(&self) -> (Tick, u64) {
        (self.0.at, self.0.seq)
    }
}

impl<M> PartialEq for Entry<M> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<M> Eq for Entry<M> {}

impl<M> PartialOrd for Entry<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M> Ord for Entry<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SimError {
    #[error("event scheduled at tick {at} but clock is at {now}")]
    PastEvent { at: Tick, now: Tick },
}

/// Future events in `(at, seq)` order. The clock only moves forward, and
/// only when an event is popped.
pub struct EventQueue<M> {
    heap: BinaryHeap<Reverse<Entry<M>>>,
    next_seq: u64,
    now: Tick,
}

impl<M> Default for EventQueue<M> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
        }
    }
}

impl<M> EventQueue<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Enqueues `kind` at tick `at`. Events at the same tick dispatch in
    /// insertion order.
    pub fn schedule(&mut self, at: Tick, kind: EventKind<M>) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::PastEvent { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry(Event { at, seq, kind })));
        Ok(seq)
    }

    pub fn pop(&mut self) -> Option<Event<M>> {
        let Reverse(Entry(ev)) = self.heap.pop()?;
        debug_assert!(ev.at >= self.now);
        self.now = ev.at;
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<Tick> {
        self.heap.peek().map(|Reverse(e)| e.0.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Number of pending events matching `pred`.
    pub fn count(&self, pred: impl Fn(&EventKind<M>) -> bool) -> usize {
        self.heap.iter().filter(|Reverse(e)| pred(&e.0.kind)).count()
    }
}
