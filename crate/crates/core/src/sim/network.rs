use crate::topology::{apply_change, mutate_topology, ChangeEvent, ChurnParams, NodeId, Topology};

use super::queue::{EventKind, EventQueue, SimError, Tick};
use super::rng::SeededRng;

/// Per-hop message latency.
pub const HOP_LATENCY: Tick = 1;

/// What the event loop hands to the protocol layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Dispatch<M> {
    /// The link survived and the receiver is alive.
    Message { from: NodeId, to: NodeId, msg: M },
    /// The link vanished or the receiver crashed before delivery.
    Dropped { from: NodeId, to: NodeId, msg: M },
    Timer { owner: NodeId, timer: u64 },
    RoundStart(NodeId),
}

struct Churn {
    params: ChurnParams,
    period: Tick,
    rng: SeededRng,
}

/// A topology plus the event loop that moves messages over it.
///
/// Churn ticks and scripted changes are applied internally; everything
/// else surfaces as a [`Dispatch`]. Periodic churn only keeps ticking while
/// other events are pending, so an idle network always drains.
pub struct Network<M> {
    topo: Topology,
    queue: EventQueue<M>,
    churn: Option<Churn>,
    messages_sent: u64,
    changes: Vec<(Tick, ChangeEvent)>,
    trace: Option<Vec<String>>,
}

impl<M> Network<M> {
    pub fn new(topo: Topology) -> Self {
        Self {
            topo,
            queue: EventQueue::new(),
            churn: None,
            messages_sent: 0,
            changes: Vec::new(),
            trace: None,
        }
    }

    /// Enables random churn every `period` ticks, starting at `period`.
    pub fn with_churn(mut self, params: ChurnParams, period: Tick, rng: SeededRng) -> Self {
        if !params.is_static() && period > 0 {
            self.queue
                .schedule(self.queue.now() + period, EventKind::ChurnTick)
                .expect("future tick");
            self.churn = Some(Churn { params, period, rng });
        }
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn into_topology(self) -> Topology {
        self.topo
    }

    pub fn now(&self) -> Tick {
        self.queue.now()
    }

    pub fn messages_sent(&self) -> u64 {
        self.messages_sent
    }

    pub fn changes(&self) -> &[(Tick, ChangeEvent)] {
        &self.changes
    }

    pub fn trace_lines(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    pub fn trace_line(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(line());
        }
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.topo.contains(node)
    }

    /// Sends `msg` over the link `from -> to`, arriving one hop later.
    /// Whether it arrives is decided at delivery time.
    pub fn send(&mut self, from: NodeId, to: NodeId, msg: M) {
        self.messages_sent += 1;
        let at = self.queue.now() + HOP_LATENCY;
        self.queue
            .schedule(at, EventKind::Deliver { msg, from, to })
            .expect("future tick");
    }

    pub fn set_timer(&mut self, owner: NodeId, timer: u64, delay: Tick) {
        let at = self.queue.now() + delay;
        self.queue
            .schedule(at, EventKind::TimerFire { owner, timer })
            .expect("future tick");
    }

    pub fn schedule_round(&mut self, master: NodeId, at: Tick) -> Result<(), SimError> {
        self.queue.schedule(at, EventKind::RoundStart(master)).map(|_| ())
    }

    /// Queues a topology change for tick `at`.
    pub fn script(&mut self, at: Tick, change: ChangeEvent) -> Result<(), SimError> {
        self.queue.schedule(at, EventKind::Scripted(change)).map(|_| ())
    }

    pub fn pending(&self, pred: impl Fn(&EventKind<M>) -> bool) -> usize {
        self.queue.count(pred)
    }

    /// Advances to the next protocol-visible event.
    pub fn step(&mut self) -> Option<Dispatch<M>> {
        loop {
            let ev = self.queue.pop()?;
            let now = ev.at;
            match ev.kind {
                EventKind::Deliver { msg, from, to } => {
                    let ok = self.topo.has_edge(from, to);
                    self.trace_line(|| format!("tick {now} {} {from} {to}", if ok { "deliver" } else { "drop" }));
                    return Some(if ok {
                        Dispatch::Message { from, to, msg }
                    } else {
                        Dispatch::Dropped { from, to, msg }
                    });
                }
                EventKind::TimerFire { owner, timer } => {
                    if self.topo.contains(owner) {
                        self.trace_line(|| format!("tick {now} timer {owner} {timer}"));
                        return Some(Dispatch::Timer { owner, timer });
                    }
                }
                EventKind::RoundStart(master) => {
                    self.trace_line(|| format!("tick {now} round {master}"));
                    return Some(Dispatch::RoundStart(master));
                }
                EventKind::ChurnTick => self.churn_tick(now),
                EventKind::Scripted(change) => {
                    if apply_change(&mut self.topo, &change) {
                        self.trace_line(|| format!("tick {now} scripted {change:?}"));
                        self.changes.push((now, change));
                    }
                }
            }
        }
    }

    fn churn_tick(&mut self, now: Tick) {
        let Some(churn) = self.churn.as_mut() else { return };
        let applied = mutate_topology(&mut self.topo, &mut churn.rng, &churn.params);
        let period = churn.period;
        self.trace_line(|| format!("tick {now} churn {}", applied.len()));
        self.changes.extend(applied.into_iter().map(|c| (now, c)));
        if !self.queue.is_empty() {
            self.queue
                .schedule(now + period, EventKind::ChurnTick)
                .expect("future tick");
        }
    }
}
