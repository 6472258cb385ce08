//! Gossip aggregation size estimators.
//!
//! One node starts with mass 1, everyone else with 0. Averaging steps
//! conserve the total, so every node's value tends to `1/N` and `1/avg`
//! estimates the size. The baseline averages one random pair per round;
//! the adapted protocol lets a master collect, average and rebroadcast the
//! values of its whole piconet (PMP nodes included) in a single round.

use std::fmt::Debug;
use std::ops::Add;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

use crate::sim::{Dispatch, Network, SeededRng, Tick};
use crate::topology::{ChurnParams, NodeId, Role, Topology};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GossipError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a master")]
    NotMaster(NodeId),
}

/// Value type of the aggregate: `f64` for simulation runs, exact
/// rationals for conservation checks.
pub trait Mass: Clone + Debug + PartialOrd + Add<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn div_count(&self, n: usize) -> Self;
    fn to_f64(&self) -> f64;
}

impl Mass for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn div_count(&self, n: usize) -> Self {
        self / n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Mass for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        BigRational::from_integer(BigInt::from(1))
    }
    fn div_count(&self, n: usize) -> Self {
        self / BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossipState<T = f64> {
    pub avg: T,
    pub is_initiator: bool,
}

/// Per-node aggregate values, indexed by node slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipStates<T = f64> {
    avg: Vec<T>,
    initiator: NodeId,
}

impl<T: Mass> GossipStates<T> {
    pub fn initiator(&self) -> NodeId {
        self.initiator
    }

    pub fn avg(&self, node: NodeId) -> &T {
        &self.avg[node.index()]
    }

    pub fn state(&self, node: NodeId) -> GossipState<T> {
        GossipState {
            avg: self.avg[node.index()].clone(),
            is_initiator: node == self.initiator,
        }
    }

    /// Sum over the live nodes of `topo`. Mass held by crashed nodes is gone.
    pub fn total(&self, topo: &Topology) -> T {
        topo.nodes().fold(T::zero(), |acc, n| acc + self.avg[n.index()].clone())
    }

    fn grow(&mut self, capacity: usize) {
        if self.avg.len() < capacity {
            self.avg.resize(capacity, T::zero());
        }
    }

    fn set(&mut self, node: NodeId, value: T) {
        self.avg[node.index()] = value;
    }
}

pub fn init_gossip<T: Mass>(topo: &Topology, initiator: NodeId) -> Result<GossipStates<T>, GossipError> {
    if !topo.contains(initiator) {
        return Err(GossipError::UnknownNode(initiator));
    }
    let mut avg = vec![T::zero(); topo.capacity()];
    avg[initiator.index()] = T::one();
    Ok(GossipStates { avg, initiator })
}

pub fn pairwise_exchange<T: Mass>(a: &T, b: &T) -> (T, T) {
    let mean = (a.clone() + b.clone()).div_count(2);
    (mean.clone(), mean)
}

/// One baseline round: a uniformly chosen node averages with a uniformly
/// chosen neighbour. Returns the pair, or `None` if the chosen node had
/// no neighbours.
pub fn baseline_round<T: Mass, R: Rng + ?Sized>(
    topo: &Topology,
    states: &mut GossipStates<T>,
    rng: &mut R,
) -> Option<(NodeId, NodeId)> {
    let node = topo.nodes().choose(rng)?;
    exchange_with_neighbour(topo, states, node, rng)
}

fn exchange_with_neighbour<T: Mass, R: Rng + ?Sized>(
    topo: &Topology,
    states: &mut GossipStates<T>,
    node: NodeId,
    rng: &mut R,
) -> Option<(NodeId, NodeId)> {
    let peer = topo.neighbors(node).ok()?.choose(rng)?;
    states.grow(topo.capacity());
    let (a, b) = pairwise_exchange(states.avg(node), states.avg(peer));
    states.set(node, a);
    states.set(peer, b);
    Some((node, peer))
}

/// Collect-average-broadcast over `master`'s piconet. Returns the cluster
/// size.
pub fn cluster_round<T: Mass>(topo: &Topology, states: &mut GossipStates<T>, master: NodeId) -> Result<usize, GossipError> {
    match topo.classify_role(master) {
        Ok(Role::Master) => {}
        Ok(_) => return Err(GossipError::NotMaster(master)),
        Err(_) => return Err(GossipError::UnknownNode(master)),
    }
    states.grow(topo.capacity());
    let cluster: Vec<NodeId> = std::iter::once(master)
        .chain(topo.neighbors(master).unwrap())
        .collect();
    let sum = cluster
        .iter()
        .fold(T::zero(), |acc, n| acc + states.avg(*n).clone());
    let mean = sum.div_count(cluster.len());
    for &n in &cluster {
        states.set(n, mean.clone());
    }
    Ok(cluster.len())
}

/// `1/avg`, undefined while the node holds no mass.
pub fn estimate_of(avg: f64) -> Option<f64> {
    (avg > 0.0).then(|| 1.0 / avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionScope {
    AllNodes,
    InitiatorOnly,
}

/// Convergence criterion, evaluated by the simulator against the true
/// size. `epsilon == 0` means every node in scope rounds `1/avg` to N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionSpec {
    pub epsilon: f64,
    pub scope: PrecisionScope,
}

impl PrecisionSpec {
    pub fn exact() -> Self {
        Self {
            epsilon: 0.0,
            scope: PrecisionScope::AllNodes,
        }
    }

    fn node_ok(&self, avg: f64, n_true: f64) -> bool {
        match estimate_of(avg) {
            None => false,
            Some(est) if self.epsilon == 0.0 => est.round() == n_true,
            Some(est) => (est - n_true).abs() / n_true <= self.epsilon,
        }
    }

    pub fn is_converged<T: Mass>(&self, topo: &Topology, states: &GossipStates<T>) -> bool {
        let n_true = topo.len() as f64;
        match self.scope {
            PrecisionScope::AllNodes => topo.nodes().all(|v| self.node_ok(states.avg(v).to_f64(), n_true)),
            PrecisionScope::InitiatorOnly => {
                let i = states.initiator();
                topo.contains(i) && self.node_ok(states.avg(i).to_f64(), n_true)
            }
        }
    }
}

/// Largest `|1/avg − N| / N` over live nodes; infinite while any node
/// holds no mass.
pub fn max_relative_error(topo: &Topology, states: &GossipStates<f64>) -> f64 {
    let n = topo.len() as f64;
    topo.nodes()
        .map(|v| match estimate_of(*states.avg(v)) {
            Some(est) => (est - n).abs() / n,
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Metrics emitted after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round_index: u64,
    /// Master of the cluster round, or the node that started the exchange.
    pub master: NodeId,
    pub cluster_size: usize,
    pub post_avg: f64,
    pub max_rel_error: f64,
    pub mass_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GossipVariant {
    Baseline,
    Adapted,
}

#[derive(Debug, Clone)]
pub struct GossipParams {
    pub precision: PrecisionSpec,
    pub max_rounds: u64,
    pub churn: ChurnParams,
    pub churn_period: Tick,
    /// Restart the aggregate every this many rounds. Off by default.
    pub epoch_rounds: Option<u64>,
    /// Keep a [`RoundRecord`] per round.
    pub record_rounds: bool,
}

impl Default for GossipParams {
    fn default() -> Self {
        Self {
            precision: PrecisionSpec::exact(),
            max_rounds: 1_000_000,
            churn: ChurnParams::none(),
            churn_period: 1,
            epoch_rounds: None,
            record_rounds: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GossipOutcome {
    /// Rounds executed; equals `max_rounds` when censored.
    pub rounds: u64,
    pub converged: bool,
    pub states: GossipStates<f64>,
    pub topology: Topology,
    pub messages_sent: u64,
    pub ticks: Tick,
    pub records: Vec<RoundRecord>,
}

impl GossipOutcome {
    pub fn true_n(&self) -> usize {
        self.topology.len()
    }

    pub fn initiator_estimate(&self) -> Option<f64> {
        let i = self.states.initiator();
        if self.topology.contains(i) {
            estimate_of(*self.states.avg(i))
        } else {
            None
        }
    }
}

/// Adapted protocol: sweeps over the masters in a fresh random order, one
/// cluster round per tick, with churn interleaved. Stops at convergence or
/// after `max_rounds` rounds.
pub fn run_adapted(
    topo: Topology,
    initiator: NodeId,
    params: &GossipParams,
    rng: &mut SeededRng,
    churn_rng: SeededRng,
) -> Result<GossipOutcome, GossipError> {
    run_gossip(GossipVariant::Adapted, topo, initiator, params, rng, churn_rng)
}

/// Baseline protocol: one pairwise exchange per tick, started by a
/// uniformly chosen node.
pub fn run_baseline(
    topo: Topology,
    initiator: NodeId,
    params: &GossipParams,
    rng: &mut SeededRng,
    churn_rng: SeededRng,
) -> Result<GossipOutcome, GossipError> {
    run_gossip(GossipVariant::Baseline, topo, initiator, params, rng, churn_rng)
}

/// Runs either variant to convergence or `max_rounds`.
pub fn run_gossip(
    variant: GossipVariant,
    topo: Topology,
    initiator: NodeId,
    params: &GossipParams,
    rng: &mut SeededRng,
    churn_rng: SeededRng,
) -> Result<GossipOutcome, GossipError> {
    let mut states: GossipStates<f64> = init_gossip(&topo, initiator)?;
    let mut net: Network<()> = Network::new(topo).with_churn(params.churn.clone(), params.churn_period, churn_rng);
    let mut rounds = 0u64;
    let mut messages = 0u64;
    let mut records = Vec::new();
    let mut sweep = Vec::new();
    let mut converged = params.precision.is_converged(net.topology(), &states);

    if !converged && params.max_rounds > 0 {
        schedule_next(variant, &mut net, &mut sweep, rng);
    }
    while !converged && rounds < params.max_rounds {
        let Some(Dispatch::RoundStart(actor)) = net.step() else {
            // Nothing left to schedule: the network has no masters or nodes.
            break;
        };
        let topo = net.topology();
        let acted = match variant {
            GossipVariant::Adapted => match cluster_round(topo, &mut states, actor) {
                Ok(size) => {
                    messages += 2 * (size as u64 - 1);
                    Some(size)
                }
                // Crashed or gone since the sweep was drawn.
                Err(_) => None,
            },
            GossipVariant::Baseline => {
                let node = if topo.contains(actor) {
                    Some(actor)
                } else {
                    topo.nodes().choose(rng)
                };
                node.map(|n| {
                    if exchange_with_neighbour(topo, &mut states, n, rng).is_some() {
                        messages += 2;
                    }
                    2
                })
            }
        };
        if let Some(cluster_size) = acted {
            rounds += 1;
            if params.epoch_rounds.is_some_and(|k| k > 0 && rounds.is_multiple_of(k)) {
                let fresh_initiator = if topo.contains(initiator) {
                    initiator
                } else {
                    topo.nodes().next().expect("non-empty")
                };
                states = init_gossip(topo, fresh_initiator)?;
            }
            converged = params.precision.is_converged(topo, &states);
            if params.record_rounds {
                records.push(RoundRecord {
                    round_index: rounds,
                    master: actor,
                    cluster_size,
                    post_avg: *states.avg(actor),
                    max_rel_error: max_relative_error(topo, &states),
                    mass_sum: states.total(topo),
                });
            }
        }
        if !converged && rounds < params.max_rounds {
            schedule_next(variant, &mut net, &mut sweep, rng);
        }
    }
    let ticks = net.now();
    Ok(GossipOutcome {
        rounds,
        converged,
        states,
        topology: net.into_topology(),
        messages_sent: messages,
        ticks,
        records,
    })
}

/// Keeps exactly one upcoming round queued. The adapted variant draws a
/// new master permutation whenever the previous sweep is used up.
fn schedule_next(variant: GossipVariant, net: &mut Network<()>, sweep: &mut Vec<NodeId>, rng: &mut SeededRng) {
    let at = net.now() + 1;
    let next = match variant {
        GossipVariant::Adapted => {
            if sweep.is_empty() {
                sweep.extend(net.topology().masters());
                sweep.shuffle(rng);
                sweep.reverse();
            }
            sweep.pop()
        }
        GossipVariant::Baseline => net.topology().nodes().choose(rng),
    };
    if let Some(n) = next {
        net.schedule_round(n, at).expect("future tick");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Stream;
    use crate::topology::{reference_network, star, ChangeEvent, Colour};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn initialisation() {
        let t = reference_network();
        let s: GossipStates<f64> = init_gossip(&t, NodeId(0)).unwrap();
        assert_eq!(*s.avg(NodeId(0)), 1.0);
        assert!(t.nodes().skip(1).all(|v| *s.avg(v) == 0.0));
        assert_eq!(s.total(&t), 1.0);
        assert!(s.state(NodeId(0)).is_initiator);
        assert_eq!(init_gossip::<f64>(&t, NodeId(40)), Err(GossipError::UnknownNode(NodeId(40))));

        let mut lone = Topology::new();
        let m = lone.add_node(Colour::Master);
        let s: GossipStates<f64> = init_gossip(&lone, m).unwrap();
        assert_eq!(estimate_of(*s.avg(m)), Some(1.0));
        assert!(PrecisionSpec::exact().is_converged(&lone, &s));
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_exchange(&1.0, &0.0), (0.5, 0.5));
        assert_eq!(pairwise_exchange(&0.5, &0.5), (0.5, 0.5));
        assert_eq!(pairwise_exchange(&0.75, &0.25), (0.5, 0.5));
    }

    #[test]
    fn cluster_rounds_on_reference_network() {
        let t = reference_network();
        let mut s: GossipStates<BigRational> = init_gossip(&t, NodeId(0)).unwrap();
        assert_eq!(cluster_round(&t, &mut s, NodeId(0)), Ok(4));
        for v in [0, 2, 3, 4] {
            assert_eq!(*s.avg(NodeId(v)), q(1, 4));
        }
        assert_eq!(*s.avg(NodeId(1)), q(0, 1));
        cluster_round(&t, &mut s, NodeId(1)).unwrap();
        for v in [1, 2, 5, 6] {
            assert_eq!(*s.avg(NodeId(v)), q(1, 16));
        }
        assert_eq!(s.total(&t), q(1, 1));
        assert_eq!(cluster_round(&t, &mut s, NodeId(2)), Err(GossipError::NotMaster(NodeId(2))));
        assert_eq!(cluster_round(&t, &mut s, NodeId(9)), Err(GossipError::UnknownNode(NodeId(9))));
    }

    #[test]
    fn star_converges_in_one_round() {
        let t = star(3);
        let mut s: GossipStates<f64> = init_gossip(&t, NodeId(0)).unwrap();
        cluster_round(&t, &mut s, NodeId(0)).unwrap();
        assert!(t.nodes().all(|v| estimate_of(*s.avg(v)) == Some(4.0)));

        for k in [1, 5, 40] {
            let out = run_adapted(
                star(k),
                NodeId(0),
                &GossipParams::default(),
                &mut SeededRng::new(3, Stream::Protocol),
                SeededRng::new(3, Stream::Churn),
            )
            .unwrap();
            assert_eq!((out.rounds, out.converged), (1, true));
        }
    }

    #[test]
    fn baseline_single_exchange() {
        let t = star(3);
        let mut s: GossipStates<f64> = init_gossip(&t, NodeId(0)).unwrap();
        let mut rng = SeededRng::new(1, Stream::Protocol);
        // Exchanges not touching the master are no-ops on zero mass; run
        // until the master takes part once.
        loop {
            let (a, b) = baseline_round(&t, &mut s, &mut rng).unwrap();
            if a == NodeId(0) || b == NodeId(0) {
                let slave = if a == NodeId(0) { b } else { a };
                assert_eq!((*s.avg(NodeId(0)), *s.avg(slave)), (0.5, 0.5));
                break;
            }
        }

        let mut two = Topology::new();
        let m = two.add_node(Colour::Master);
        let x = two.add_node(Colour::Slave);
        two.add_edge(m, x).unwrap();
        let out = run_baseline(
            two,
            m,
            &GossipParams::default(),
            &mut SeededRng::new(0, Stream::Protocol),
            SeededRng::new(0, Stream::Churn),
        )
        .unwrap();
        assert_eq!((out.rounds, out.converged), (1, true));
        assert_eq!(out.initiator_estimate(), Some(2.0));
    }

    #[test]
    fn estimates() {
        assert_eq!(estimate_of(0.25), Some(4.0));
        assert_eq!(estimate_of(0.0), None);
        assert_eq!(estimate_of(1.0), Some(1.0));
    }

    #[test]
    fn precision_scopes() {
        let t = reference_network();
        let mut s: GossipStates<f64> = init_gossip(&t, NodeId(0)).unwrap();
        let loose = PrecisionSpec {
            epsilon: 0.5,
            scope: PrecisionScope::InitiatorOnly,
        };
        assert!(!loose.is_converged(&t, &s));
        cluster_round(&t, &mut s, NodeId(0)).unwrap();
        // 1/0.25 = 4 against N = 7
        assert!(loose.is_converged(&t, &s));
        assert!(!PrecisionSpec { scope: PrecisionScope::AllNodes, ..loose }.is_converged(&t, &s));
    }

    #[test]
    fn repeated_runs_agree() {
        let run = || {
            run_adapted(
                reference_network(),
                NodeId(0),
                &GossipParams::default(),
                &mut SeededRng::new(11, Stream::Protocol),
                SeededRng::new(11, Stream::Churn),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert!(a.converged);
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn crash_removes_exactly_the_crashed_mass() {
        let t = reference_network();
        let mut s: GossipStates<BigRational> = init_gossip(&t, NodeId(0)).unwrap();
        cluster_round(&t, &mut s, NodeId(0)).unwrap();
        cluster_round(&t, &mut s, NodeId(1)).unwrap();
        let mut crashed = t.clone();
        let lost = s.avg(NodeId(3)).clone();
        crate::topology::apply_change(&mut crashed, &ChangeEvent::Crash { node: NodeId(3), orphans: vec![] });
        assert_eq!(s.total(&crashed) + lost, q(1, 1));
    }

    #[test]
    fn round_records_track_mass() {
        let params = GossipParams {
            record_rounds: true,
            ..GossipParams::default()
        };
        let out = run_adapted(
            reference_network(),
            NodeId(0),
            &params,
            &mut SeededRng::new(5, Stream::Protocol),
            SeededRng::new(5, Stream::Churn),
        )
        .unwrap();
        assert_eq!(out.records.len() as u64, out.rounds);
        for (i, r) in out.records.iter().enumerate() {
            assert_eq!(r.round_index, i as u64 + 1);
            assert!((r.mass_sum - 1.0).abs() < 1e-12);
        }
        assert!(out.records.last().unwrap().max_rel_error < 0.5 / 7.0);
    }

    #[test]
    fn censored_when_round_budget_runs_out() {
        let params = GossipParams {
            max_rounds: 3,
            ..GossipParams::default()
        };
        let out = run_baseline(
            reference_network(),
            NodeId(0),
            &params,
            &mut SeededRng::new(5, Stream::Protocol),
            SeededRng::new(5, Stream::Churn),
        )
        .unwrap();
        assert_eq!((out.rounds, out.converged), (3, false));
    }

    fn spread(t: &Topology, s: &GossipStates<BigRational>) -> BigRational {
        let vals: Vec<_> = t.nodes().map(|v| s.avg(v).clone()).collect();
        let max = vals.iter().max().unwrap().clone();
        let min = vals.iter().min().unwrap().clone();
        max - min
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cluster_rounds_conserve_and_contract(seed in any::<u64>(), steps in 1usize..40) {
            let mut rng = SeededRng::new(seed, Stream::Topology);
            let p = crate::topology::GenParams { n_masters: 4, n_slaves: 10, ..Default::default() };
            let t = crate::topology::generate_topology(&mut rng, &p).unwrap();
            let masters: Vec<_> = t.masters().collect();
            let init = t.nodes().choose(&mut rng).unwrap();
            let mut s: GossipStates<BigRational> = init_gossip(&t, init).unwrap();
            let mut prev = spread(&t, &s);
            for _ in 0..steps {
                let m = *masters.choose(&mut rng).unwrap();
                cluster_round(&t, &mut s, m).unwrap();
                prop_assert_eq!(s.total(&t), q(1, 1));
                let now = spread(&t, &s);
                prop_assert!(now <= prev);
                prop_assert!(t.nodes().all(|v| *s.avg(v) >= q(0, 1) && *s.avg(v) <= q(1, 1)));
                prev = now;
            }
        }

        #[test]
        fn pairwise_conserves_exactly(a in 0i64..1000, b in 0i64..1000, d in 1i64..1000) {
            let (x, y) = pairwise_exchange(&q(a, d), &q(b, d));
            prop_assert_eq!(x.clone(), y.clone());
            prop_assert_eq!(x + y, q(a + b, d));
        }
    }
}
