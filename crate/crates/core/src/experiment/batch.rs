use rand::seq::IteratorRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gossip::RoundRecord;
use crate::sim::{SeededRng, Stream};
use crate::topology::{generate_topology, NodeId};

use super::config::{ConfigError, ScenarioConfig};
use super::registry::{self, RunContext};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CENSUS_THREADS";

/// One row of a batch: the outcome of a single seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub scenario: String,
    pub protocol: String,
    pub seed: u64,
    pub topology_seed: u64,
    pub initial_n: usize,
    /// Size of the network when the run completed.
    pub true_n: usize,
    pub estimate: Option<f64>,
    pub relative_error: Option<f64>,
    pub rounds_or_hops: u64,
    pub messages_sent: u64,
    pub completed_via: String,
    pub wall_ticks: u64,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.completed_via == "failed"
    }

    pub fn signed_error(&self) -> Option<f64> {
        let n = self.true_n as f64;
        self.estimate.filter(|_| n > 0.0).map(|e| (e - n) / n)
    }
}

/// Per-round gossip metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub scenario: String,
    pub protocol: String,
    pub seed: u64,
    pub round_index: u64,
    pub master: u32,
    pub cluster_size: usize,
    pub max_rel_error: f64,
    pub mass_sum: f64,
}

/// Everything a batch produced, ordered by seed.
#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    pub records: Vec<ExperimentRecord>,
    pub rounds: Vec<RoundRow>,
    /// Trace lines per run, in record order. Empty unless tracing.
    pub traces: Vec<Vec<String>>,
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a pool capped by `CENSUS_THREADS`, or the global pool.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_count().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

struct Single {
    record: ExperimentRecord,
    rounds: Vec<RoundRecord>,
    trace: Vec<String>,
}

fn run_single(cfg: &ScenarioConfig, index: u64, trace: bool) -> Single {
    let seed = cfg.base_seed + index;
    let topology_seed = cfg.base_seed + index / cfg.runs_per_topology * cfg.runs_per_topology;
    let estimator = registry::lookup(&cfg.protocol).expect("validated protocol");
    let mut record = ExperimentRecord {
        scenario: cfg.name.clone(),
        protocol: cfg.protocol.clone(),
        seed,
        topology_seed,
        initial_n: 0,
        true_n: 0,
        estimate: None,
        relative_error: None,
        rounds_or_hops: 0,
        messages_sent: 0,
        completed_via: "failed".into(),
        wall_ticks: 0,
    };
    let topology = match generate_topology(&mut SeededRng::new(topology_seed, Stream::Topology), &cfg.topology) {
        Ok(t) => t,
        Err(e) => {
            return Single {
                record,
                rounds: Vec::new(),
                trace: vec![format!("error {e}")],
            }
        }
    };
    record.initial_n = topology.len();
    // Tours must start at a master; gossip uses the same choice so both
    // families see the same origin for a given seed.
    let origin = topology
        .masters()
        .choose(&mut SeededRng::new(seed, Stream::Harness))
        .unwrap_or(NodeId(0));
    let out = estimator.run(RunContext {
        config: cfg,
        topology,
        origin,
        seed,
        trace,
    });
    record.true_n = out.true_n;
    record.estimate = out.estimate;
    record.relative_error = record.signed_error().map(f64::abs);
    record.rounds_or_hops = out.rounds_or_hops;
    record.messages_sent = out.messages_sent;
    record.completed_via = out.completed_via;
    record.wall_ticks = out.wall_ticks;
    Single {
        record,
        rounds: out.rounds,
        trace: out.trace,
    }
}

/// Runs `repetitions` seeded runs (seeds `base_seed + i`), in parallel.
/// Output order follows the seed regardless of scheduling. A run that
/// cannot produce an estimate yields a `failed` row instead of an error.
pub fn run_batch(cfg: &ScenarioConfig) -> Result<Vec<ExperimentRecord>, ConfigError> {
    Ok(run_batch_full(cfg, false)?.records)
}

pub fn run_batch_full(cfg: &ScenarioConfig, trace: bool) -> Result<BatchOutput, ConfigError> {
    cfg.validate()?;
    let singles: Vec<Single> = with_pool(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|i| run_single(cfg, i, trace))
            .collect()
    });
    let mut out = BatchOutput::default();
    for s in singles {
        out.rounds.extend(s.rounds.into_iter().map(|r| RoundRow {
            scenario: s.record.scenario.clone(),
            protocol: s.record.protocol.clone(),
            seed: s.record.seed,
            round_index: r.round_index,
            master: r.master.0,
            cluster_size: r.cluster_size,
            max_rel_error: r.max_rel_error,
            mass_sum: r.mass_sum,
        }));
        if trace {
            out.traces.push(s.trace);
        }
        out.records.push(s.record);
    }
    Ok(out)
}
