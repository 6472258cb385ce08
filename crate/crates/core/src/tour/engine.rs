use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IteratorRandom;
use rand::Rng;

use crate::sim::{route_to, Dispatch, EventKind, Flood, Network, Tick};
use crate::topology::{NodeId, Topology};

use super::token::{GatheredStats, TokenRules, TourError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    /// Any current neighbour, visited or not.
    Normal,
    /// Neighbours neither tried for this hop nor already visited.
    Recovery,
}

/// Picks the next holder uniformly from the eligible neighbours of
/// `holder`. `None` means the holder is exhausted.
pub fn select_next_hop<R: Rng + ?Sized>(
    topo: &Topology,
    holder: NodeId,
    visited: &BTreeSet<NodeId>,
    tried: &BTreeSet<NodeId>,
    rng: &mut R,
    mode: SelectMode,
) -> Option<NodeId> {
    let neighbours = topo.neighbors(holder).ok()?;
    match mode {
        SelectMode::Normal => neighbours.choose(rng),
        SelectMode::Recovery => neighbours
            .filter(|n| !tried.contains(n) && !visited.contains(n))
            .choose(rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Completion {
    NaturalReturn,
    RoutedReturn,
    Failed,
}

impl fmt::Display for Completion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Completion::NaturalReturn => "natural_return",
            Completion::RoutedReturn => "routed_return",
            Completion::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TourParams {
    pub tour_id: u64,
    /// Ticks a holder waits for the forwarding acknowledgement.
    pub ack_timeout: Tick,
    /// Token visits after which the holder sends it home by routing.
    /// `None` selects 50 × the network size at start.
    pub max_hops: Option<u64>,
    /// Flood the estimate from the originator after finalizing.
    pub disseminate: bool,
}

impl Default for TourParams {
    fn default() -> Self {
        Self {
            tour_id: 0,
            ack_timeout: 4,
            max_hops: None,
            disseminate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TourOutcome {
    /// Absent only when the tour failed.
    pub estimate: Option<f64>,
    /// Token visits (routed return hops excluded).
    pub hops: u64,
    pub messages_sent: u64,
    pub completed_via: Completion,
    pub stats_gathered: Option<GatheredStats>,
    /// The hop valve forced a routed return.
    pub hop_limit_hit: bool,
    /// Tick at which the originator finalized, or the last tick on failure.
    pub finished_at: Tick,
    /// Size of the originator's component when the tour finished.
    pub true_n: usize,
    /// Nodes that received the disseminated estimate, originator included.
    pub reached: usize,
    pub timeouts: u64,
    /// Stale token copies discarded on arrival.
    pub absorbed: u64,
}

#[derive(Debug, Clone)]
pub enum TourMsg<T> {
    Token { token: T, transfer: u64 },
    /// Forwarding acknowledgement, routed back to `dest`.
    Ack { transfer: u64, dest: NodeId },
    /// Token routed home after the walk could not continue.
    Return { token: T, dest: NodeId },
    Estimate { tour_id: u64, value: f64 },
}

struct Pending<T> {
    holder: NodeId,
    token: T,
    tried: BTreeSet<NodeId>,
    /// The forwarded copy was dropped; custody is back with the holder.
    lost: bool,
}

enum Timer<T> {
    Forward {
        holder: NodeId,
        token: T,
        ack_to: (NodeId, u64),
    },
    AckTimeout {
        transfer: u64,
    },
}

struct Finished {
    estimate: f64,
    stats: Option<GatheredStats>,
    via: Completion,
    at: Tick,
    true_n: usize,
    hops: u64,
}

struct Engine<'a, R: TokenRules, G: Rng + ?Sized> {
    rules: &'a R,
    rng: &'a mut G,
    params: TourParams,
    originator: NodeId,
    max_hops: u64,
    next_id: u64,
    pending: BTreeMap<u64, Pending<R::Token>>,
    timers: BTreeMap<u64, Timer<R::Token>>,
    /// Highest hop count each node has processed for this tour.
    high_water: BTreeMap<NodeId, u64>,
    hop_limit_hit: bool,
    timeouts: u64,
    absorbed: u64,
    last_hops: u64,
    finished: Option<Finished>,
    flood: Option<Flood>,
}

/// Runs one tour from `originator` on `net` until the network drains.
pub fn run_tour<R, G>(
    net: &mut Network<TourMsg<R::Token>>,
    rules: &R,
    originator: NodeId,
    params: TourParams,
    rng: &mut G,
) -> Result<TourOutcome, TourError>
where
    R: TokenRules,
    G: Rng + ?Sized,
{
    run_tour_observed(net, rules, originator, params, rng, |_, _| {})
}

/// As [`run_tour`], calling `observe(tick, live_tokens)` after every
/// dispatched event until the tour finishes. A token is live while it is
/// in flight, held by a node, or back in custody of a sender whose copy
/// was dropped.
pub fn run_tour_observed<R, G, F>(
    net: &mut Network<TourMsg<R::Token>>,
    rules: &R,
    originator: NodeId,
    params: TourParams,
    rng: &mut G,
    mut observe: F,
) -> Result<TourOutcome, TourError>
where
    R: TokenRules,
    G: Rng + ?Sized,
    F: FnMut(Tick, usize),
{
    let token = rules.init(net.topology(), originator, params.tour_id)?;
    let max_hops = params.max_hops.unwrap_or(50 * net.topology().len() as u64);
    let mut engine = Engine {
        rules,
        rng,
        params,
        originator,
        max_hops,
        next_id: 0,
        pending: BTreeMap::new(),
        timers: BTreeMap::new(),
        high_water: BTreeMap::from([(originator, 0)]),
        hop_limit_hit: false,
        timeouts: 0,
        absorbed: 0,
        last_hops: 0,
        finished: None,
        flood: None,
    };
    engine.trace_visit(net, originator, &token);
    engine.forward(net, originator, token, BTreeSet::new(), SelectMode::Normal);
    observe(net.now(), engine.live_tokens(net));

    while let Some(d) = net.step() {
        match d {
            Dispatch::Message { from, to, msg } => engine.on_message(net, from, to, msg),
            Dispatch::Dropped { from, to, msg } => engine.on_dropped(net, from, to, msg),
            Dispatch::Timer { owner, timer } => engine.on_timer(net, owner, timer),
            Dispatch::RoundStart(_) => {}
        }
        if engine.finished.is_none() {
            observe(net.now(), engine.live_tokens(net));
        }
    }
    Ok(engine.outcome(net))
}

impl<R: TokenRules, G: Rng + ?Sized> Engine<'_, R, G> {
    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn knows_finished(&self, node: NodeId) -> bool {
        node == self.originator && self.finished.is_some()
            || self.flood.as_ref().is_some_and(|f| f.reached().contains(&node))
    }

    fn trace_visit(&self, net: &mut Network<TourMsg<R::Token>>, at: NodeId, token: &R::Token) {
        if net.tracing() {
            let role = net.topology().classify_role(at).map(|r| r.to_string()).unwrap_or_default();
            let line = format!(
                "tour {} hop {} at {} role {} token {}",
                self.params.tour_id,
                self.rules.hops(token),
                at,
                role,
                self.rules.counters(token)
            );
            net.trace_line(|| line);
        }
    }

    fn forward(
        &mut self,
        net: &mut Network<TourMsg<R::Token>>,
        holder: NodeId,
        token: R::Token,
        mut tried: BTreeSet<NodeId>,
        mode: SelectMode,
    ) {
        let next = select_next_hop(
            net.topology(),
            holder,
            self.rules.visited(&token),
            &tried,
            self.rng,
            mode,
        );
        let Some(next) = next else {
            self.routed_return(net, holder, token);
            return;
        };
        tried.insert(next);
        let transfer = self.fresh_id();
        net.send(holder, next, TourMsg::Token { token: token.clone(), transfer });
        self.pending.insert(
            transfer,
            Pending {
                holder,
                token,
                tried,
                lost: false,
            },
        );
        let timer = self.fresh_id();
        self.timers.insert(timer, Timer::AckTimeout { transfer });
        net.set_timer(holder, timer, self.params.ack_timeout);
    }

    fn routed_return(&mut self, net: &mut Network<TourMsg<R::Token>>, at: NodeId, token: R::Token) {
        if at == self.originator {
            self.finish(net, &token, Completion::RoutedReturn);
            return;
        }
        let dest = self.originator;
        self.send_routed(net, at, dest, TourMsg::Return { token, dest });
    }

    /// Sends `msg` one hop along the current shortest path to `dest`.
    /// Returns false, dropping the message, when no route exists.
    fn send_routed(&mut self, net: &mut Network<TourMsg<R::Token>>, at: NodeId, dest: NodeId, msg: TourMsg<R::Token>) -> bool {
        match route_to(net.topology(), at, dest) {
            Some(path) if path.len() >= 2 => {
                net.send(at, path[1], msg);
                true
            }
            _ => false,
        }
    }

    fn on_message(&mut self, net: &mut Network<TourMsg<R::Token>>, from: NodeId, to: NodeId, msg: TourMsg<R::Token>) {
        match msg {
            TourMsg::Token { token, transfer } => {
                let stale = self.high_water.get(&to).is_some_and(|&hw| hw > self.rules.hops(&token));
                if self.knows_finished(to) || stale {
                    self.absorbed += 1;
                    return;
                }
                if to == self.originator {
                    self.send_routed(net, to, from, TourMsg::Ack { transfer, dest: from });
                    self.finish(net, &token, Completion::NaturalReturn);
                    return;
                }
                let topo = net.topology();
                let role = topo.classify_role(to).expect("delivered to a live node");
                let degree = topo.degree(to).unwrap() as u64;
                let token = self.rules.visit(token, to, role, degree);
                self.last_hops = self.last_hops.max(self.rules.hops(&token));
                self.high_water.insert(to, self.rules.hops(&token));
                self.trace_visit(net, to, &token);
                let timer = self.fresh_id();
                self.timers.insert(
                    timer,
                    Timer::Forward {
                        holder: to,
                        token,
                        ack_to: (from, transfer),
                    },
                );
                net.set_timer(to, timer, 1);
            }
            TourMsg::Ack { transfer, dest } => {
                if to == dest {
                    self.pending.remove(&transfer);
                } else {
                    self.send_routed(net, to, dest, TourMsg::Ack { transfer, dest });
                }
            }
            TourMsg::Return { token, dest } => {
                if to != dest {
                    self.send_routed(net, to, dest, TourMsg::Return { token, dest });
                } else if self.finished.is_none() {
                    self.finish(net, &token, Completion::RoutedReturn);
                } else {
                    self.absorbed += 1;
                }
            }
            TourMsg::Estimate { .. } => {
                if let Some(mut flood) = self.flood.take() {
                    flood.on_deliver(net, from, to, &msg);
                    self.flood = Some(flood);
                }
            }
        }
    }

    fn on_dropped(&mut self, net: &mut Network<TourMsg<R::Token>>, from: NodeId, _to: NodeId, msg: TourMsg<R::Token>) {
        match msg {
            TourMsg::Token { transfer, .. } => {
                if let Some(p) = self.pending.get_mut(&transfer) {
                    p.lost = true;
                }
            }
            // Routed traffic re-routes from the hop where the link broke.
            TourMsg::Ack { dest, .. } | TourMsg::Return { dest, .. } => {
                if net.is_alive(from) {
                    self.send_routed(net, from, dest, msg);
                }
            }
            TourMsg::Estimate { .. } => {}
        }
    }

    fn on_timer(&mut self, net: &mut Network<TourMsg<R::Token>>, owner: NodeId, timer: u64) {
        let Some(action) = self.timers.remove(&timer) else { return };
        match action {
            Timer::Forward { holder, token, ack_to } => {
                debug_assert_eq!(holder, owner);
                if self.knows_finished(holder) {
                    self.absorbed += 1;
                    return;
                }
                if self.rules.hops(&token) >= self.max_hops {
                    self.hop_limit_hit = true;
                    self.routed_return(net, holder, token);
                } else {
                    self.forward(net, holder, token, BTreeSet::new(), SelectMode::Normal);
                }
                let (prev, transfer) = ack_to;
                self.send_routed(net, holder, prev, TourMsg::Ack { transfer, dest: prev });
            }
            Timer::AckTimeout { transfer } => {
                let Some(p) = self.pending.remove(&transfer) else { return };
                self.timeouts += 1;
                if self.knows_finished(p.holder) {
                    return;
                }
                self.forward(net, p.holder, p.token, p.tried, SelectMode::Recovery);
            }
        }
    }

    fn finish(&mut self, net: &mut Network<TourMsg<R::Token>>, token: &R::Token, via: Completion) {
        let (estimate, stats) = self.rules.finalize(token);
        self.finished = Some(Finished {
            estimate,
            stats,
            via,
            at: net.now(),
            true_n: net.topology().component_of(self.originator).len(),
            hops: self.rules.hops(token),
        });
        net.trace_line(|| format!("tour {} done {} estimate {}", self.params.tour_id, via, estimate));
        if self.params.disseminate {
            let msg = TourMsg::Estimate {
                tour_id: self.params.tour_id,
                value: estimate,
            };
            self.flood = Some(Flood::start(net, self.originator, msg));
        }
    }

    fn live_tokens(&self, net: &Network<TourMsg<R::Token>>) -> usize {
        let in_flight = net.pending(|k| {
            matches!(
                k,
                EventKind::Deliver {
                    msg: TourMsg::Token { .. } | TourMsg::Return { .. },
                    ..
                }
            )
        });
        let held = self
            .timers
            .values()
            .filter(|t| matches!(t, Timer::Forward { holder, .. } if net.is_alive(*holder)))
            .count();
        let reclaimed = self
            .pending
            .values()
            .filter(|p| p.lost && net.is_alive(p.holder))
            .count();
        in_flight + held + reclaimed
    }

    fn outcome(self, net: &Network<TourMsg<R::Token>>) -> TourOutcome {
        let reached = self.flood.as_ref().map_or(0, |f| f.reached().len());
        match self.finished {
            Some(f) => TourOutcome {
                estimate: Some(f.estimate),
                hops: f.hops,
                messages_sent: net.messages_sent(),
                completed_via: f.via,
                stats_gathered: f.stats,
                hop_limit_hit: self.hop_limit_hit,
                finished_at: f.at,
                true_n: f.true_n,
                reached,
                timeouts: self.timeouts,
                absorbed: self.absorbed,
            },
            None => TourOutcome {
                estimate: None,
                hops: self.last_hops,
                messages_sent: net.messages_sent(),
                completed_via: Completion::Failed,
                stats_gathered: None,
                hop_limit_hit: self.hop_limit_hit,
                finished_at: net.now(),
                true_n: net.topology().component_of(self.originator).len(),
                reached,
                timeouts: self.timeouts,
                absorbed: self.absorbed,
            },
        }
    }
}
