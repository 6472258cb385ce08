//! Named scenario grids shipped with the runner.

use crate::topology::GenParams;

use super::config::ScenarioConfig;

pub const PRESETS: [&str; 3] = ["fig1_random_tour", "tbl1_gossip", "mobility_stress"];

/// Ensemble used by every preset: about √n masters, a quarter of the
/// slaves bridging up to three piconets.
pub fn ensemble(n: usize) -> GenParams {
    let masters = ((n as f64).sqrt().round() as usize).clamp(1, n);
    GenParams {
        n_masters: masters,
        n_slaves: n - masters,
        pmp_fraction: 0.25,
        max_pmp_degree: 3,
        connected: true,
    }
}

struct Churn {
    label: &'static str,
    migration: f64,
    link: f64,
    crash: f64,
}

const STATIC: Churn = Churn {
    label: "static",
    migration: 0.0,
    link: 0.0,
    crash: 0.0,
};

const LOW: Churn = Churn {
    label: "low",
    migration: 0.01,
    link: 0.005,
    crash: 0.0,
};

fn scenario(name: String, protocol: &str, n: usize, churn: &Churn, base_seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name,
        protocol: protocol.into(),
        topology: ensemble(n),
        migration_rate: churn.migration,
        pmp_link_rate: churn.link,
        crash_rate: churn.crash,
        base_seed,
        ..ScenarioConfig::default()
    }
}

/// Random tours on 50 topologies of 20–100 nodes (ten per size), 100
/// tours each, static and under light churn. Both variants share seeds.
fn fig1() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for churn in [&STATIC, &LOW] {
        for (i, n) in [20, 40, 60, 80, 100].into_iter().enumerate() {
            for protocol in ["rt_adapted", "rt_baseline"] {
                out.push(ScenarioConfig {
                    repetitions: 1000,
                    runs_per_topology: 100,
                    ..scenario(format!("fig1_n{n}_{}", churn.label), protocol, n, churn, 100_000 * (i as u64 + 1))
                });
            }
        }
    }
    out
}

/// Rounds to exact convergence for both gossip variants at 20, 60 and 100
/// nodes, 20 seeds each.
fn tbl1() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for (i, n) in [20, 60, 100].into_iter().enumerate() {
        for protocol in ["gossip_adapted", "gossip_baseline"] {
            out.push(ScenarioConfig {
                repetitions: 20,
                ..scenario(format!("tbl1_n{n}"), protocol, n, &STATIC, 1000 * (i as u64 + 1))
            });
        }
    }
    out
}

/// All four estimators on 40-node networks under increasing mobility,
/// plus tours with node crashes.
fn mobility() -> Vec<ScenarioConfig> {
    let levels = [
        LOW,
        Churn {
            label: "medium",
            migration: 0.05,
            link: 0.02,
            crash: 0.0,
        },
        Churn {
            label: "high",
            migration: 0.1,
            link: 0.05,
            crash: 0.0,
        },
    ];
    let mut out = Vec::new();
    for churn in &levels {
        for protocol in super::registry::names() {
            out.push(ScenarioConfig {
                repetitions: 30,
                ..scenario(format!("mobility_{}", churn.label), protocol, 40, churn, 7000)
            });
        }
    }
    let crash = Churn {
        label: "crash",
        migration: 0.05,
        link: 0.02,
        crash: 0.002,
    };
    for protocol in ["rt_adapted", "rt_baseline"] {
        out.push(ScenarioConfig {
            repetitions: 30,
            ..scenario("mobility_crash".into(), protocol, 40, &crash, 7000)
        });
    }
    out
}

pub fn preset(name: &str) -> Option<Vec<ScenarioConfig>> {
    match name {
        "fig1_random_tour" => Some(fig1()),
        "tbl1_gossip" => Some(tbl1()),
        "mobility_stress" => Some(mobility()),
        _ => None,
    }
}
