use crate::gossip::{run_gossip, GossipParams, GossipVariant, PrecisionSpec, RoundRecord};
use crate::sim::{Network, SeededRng, Stream};
use crate::topology::{NodeId, Topology};
use crate::tour::{run_tour, AdaptedRules, BaselineRules, TokenRules, TourParams};

use super::config::ScenarioConfig;

/// Inputs of one seeded run.
pub struct RunContext<'a> {
    pub config: &'a ScenarioConfig,
    pub topology: Topology,
    /// Node that starts the tour or holds the initial gossip mass.
    pub origin: NodeId,
    pub seed: u64,
    pub trace: bool,
}

/// What a run reports back, independent of the protocol family.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub estimate: Option<f64>,
    pub true_n: usize,
    pub rounds_or_hops: u64,
    pub messages_sent: u64,
    pub completed_via: String,
    pub wall_ticks: u64,
    pub trace: Vec<String>,
    pub rounds: Vec<RoundRecord>,
}

/// A size estimator that can be selected by name.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: RunContext<'_>) -> RunResult;
}

struct RandomTour<R> {
    name: &'static str,
    rules: R,
}

impl<R: TokenRules + Send + Sync> Estimator for RandomTour<R> {
    fn name(&self) -> &'static str {
        self.name
    }

    fn run(&self, ctx: RunContext<'_>) -> RunResult {
        let cfg = ctx.config;
        let mut net = Network::new(ctx.topology).with_churn(
            cfg.churn(),
            cfg.churn_period,
            SeededRng::new(ctx.seed, Stream::Churn),
        );
        if ctx.trace {
            net = net.with_trace();
        }
        let params = TourParams {
            tour_id: ctx.seed,
            ack_timeout: cfg.ack_timeout_ticks,
            max_hops: (cfg.max_hops > 0).then_some(cfg.max_hops),
            ..TourParams::default()
        };
        let mut rng = SeededRng::new(ctx.seed, Stream::Protocol);
        match run_tour(&mut net, &self.rules, ctx.origin, params, &mut rng) {
            Ok(out) => RunResult {
                estimate: out.estimate,
                true_n: out.true_n,
                rounds_or_hops: out.hops,
                messages_sent: out.messages_sent,
                completed_via: out.completed_via.to_string(),
                wall_ticks: out.finished_at,
                trace: net.trace_lines().to_vec(),
                rounds: Vec::new(),
            },
            Err(e) => RunResult {
                true_n: net.topology().len(),
                completed_via: "failed".into(),
                trace: vec![format!("error {e}")],
                ..RunResult::default()
            },
        }
    }
}

struct Gossip {
    name: &'static str,
    variant: GossipVariant,
}

impl Estimator for Gossip {
    fn name(&self) -> &'static str {
        self.name
    }

    fn run(&self, ctx: RunContext<'_>) -> RunResult {
        let cfg = ctx.config;
        let params = GossipParams {
            precision: PrecisionSpec {
                epsilon: cfg.epsilon,
                scope: cfg.precision_scope,
            },
            max_rounds: cfg.max_rounds,
            churn: cfg.churn(),
            churn_period: cfg.churn_period,
            epoch_rounds: (cfg.epoch_rounds > 0).then_some(cfg.epoch_rounds),
            record_rounds: cfg.round_metrics.is_some() || ctx.trace,
        };
        let true_n = ctx.topology.len();
        let mut rng = SeededRng::new(ctx.seed, Stream::Protocol);
        let churn_rng = SeededRng::new(ctx.seed, Stream::Churn);
        match run_gossip(self.variant, ctx.topology, ctx.origin, &params, &mut rng, churn_rng) {
            Ok(out) => {
                let trace = if ctx.trace {
                    out.records
                        .iter()
                        .map(|r| {
                            format!(
                                "round {} at {} size {} avg {} max_rel_error {} sum {}",
                                r.round_index, r.master, r.cluster_size, r.post_avg, r.max_rel_error, r.mass_sum
                            )
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                RunResult {
                    estimate: out.initiator_estimate(),
                    true_n: out.true_n(),
                    rounds_or_hops: out.rounds,
                    messages_sent: out.messages_sent,
                    completed_via: if out.converged { "converged" } else { "censored" }.into(),
                    wall_ticks: out.ticks,
                    trace,
                    rounds: if cfg.round_metrics.is_some() { out.records } else { Vec::new() },
                }
            }
            Err(e) => RunResult {
                true_n,
                completed_via: "failed".into(),
                trace: vec![format!("error {e}")],
                ..RunResult::default()
            },
        }
    }
}

static ESTIMATORS: [&dyn Estimator; 4] = [
    &RandomTour {
        name: "rt_adapted",
        rules: AdaptedRules,
    },
    &RandomTour {
        name: "rt_baseline",
        rules: BaselineRules,
    },
    &Gossip {
        name: "gossip_adapted",
        variant: GossipVariant::Adapted,
    },
    &Gossip {
        name: "gossip_baseline",
        variant: GossipVariant::Baseline,
    },
];

/// Every registered estimator, in a fixed order.
pub fn estimators() -> &'static [&'static dyn Estimator] {
    &ESTIMATORS
}

pub fn names() -> Vec<&'static str> {
    ESTIMATORS.iter().map(|e| e.name()).collect()
}

pub fn lookup(name: &str) -> Option<&'static dyn Estimator> {
    ESTIMATORS.iter().copied().find(|e| e.name() == name)
}
