use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::gossip::PrecisionScope;
use crate::topology::{ChurnParams, GenParams};

use super::registry;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One experiment scenario: a topology ensemble, a churn model and a
/// protocol, repeated over consecutive seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub protocol: String,
    pub topology: GenParams,
    pub migration_rate: f64,
    pub pmp_link_rate: f64,
    pub crash_rate: f64,
    pub preserve_connectivity: bool,
    pub churn_period: u64,
    pub epsilon: f64,
    pub precision_scope: PrecisionScope,
    pub repetitions: u64,
    /// Consecutive seeds sharing one generated topology.
    pub runs_per_topology: u64,
    pub base_seed: u64,
    pub ack_timeout_ticks: u64,
    /// 0 selects 50 × the network size.
    pub max_hops: u64,
    pub max_rounds: u64,
    /// 0 disables restarts.
    pub epoch_rounds: u64,
    pub out: Option<PathBuf>,
    /// Per-round gossip metrics destination.
    pub round_metrics: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            protocol: "rt_adapted".into(),
            topology: GenParams::default(),
            migration_rate: 0.0,
            pmp_link_rate: 0.0,
            crash_rate: 0.0,
            preserve_connectivity: true,
            churn_period: 5,
            epsilon: 0.0,
            precision_scope: PrecisionScope::AllNodes,
            repetitions: 10,
            runs_per_topology: 1,
            base_seed: 0,
            ack_timeout_ticks: 4,
            max_hops: 0,
            max_rounds: 1_000_000,
            epoch_rounds: 0,
            out: None,
            round_metrics: None,
        }
    }
}

fn scope_name(s: PrecisionScope) -> &'static str {
    match s {
        PrecisionScope::AllNodes => "all_nodes",
        PrecisionScope::InitiatorOnly => "initiator_only",
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::Syntax {
        line,
        message: format!("bad value `{raw}` for `{key}`"),
    })
}

impl ScenarioConfig {
    pub fn churn(&self) -> ChurnParams {
        ChurnParams {
            migration_rate: self.migration_rate,
            pmp_link_rate: self.pmp_link_rate,
            crash_rate: self.crash_rate,
            max_pmp_degree: self.topology.max_pmp_degree,
            preserve_connectivity: self.preserve_connectivity,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.name.trim().is_empty() || self.name.trim() != self.name || self.name.contains(['#', '\n', '\r']) {
            return bad("name must be non-empty, without surrounding spaces, `#` or newlines");
        }
        if registry::lookup(&self.protocol).is_none() {
            return Err(ConfigError::UnknownProtocol(self.protocol.clone()));
        }
        self.topology
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (key, v) in [
            ("migration_rate", self.migration_rate),
            ("pmp_link_rate", self.pmp_link_rate),
            ("crash_rate", self.crash_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{key} must lie in [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1)");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.runs_per_topology == 0 {
            return bad("runs_per_topology must be at least 1");
        }
        if self.churn_period == 0 || self.ack_timeout_ticks == 0 || self.max_rounds == 0 {
            return bad("churn_period, ack_timeout_ticks and max_rounds must be positive");
        }
        if self.base_seed.checked_add(self.repetitions).is_none() {
            return bad("seed range overflows");
        }
        Ok(())
    }

    /// Parses the `key = value` format. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            let t = &mut cfg.topology;
            match key {
                "name" => cfg.name = value.to_string(),
                "protocol" => cfg.protocol = value.to_string(),
                "n_masters" => t.n_masters = parse_value(line, key, value)?,
                "n_slaves" => t.n_slaves = parse_value(line, key, value)?,
                "pmp_fraction" => t.pmp_fraction = parse_value(line, key, value)?,
                "max_pmp_degree" => t.max_pmp_degree = parse_value(line, key, value)?,
                "connected" => t.connected = parse_value(line, key, value)?,
                "migration_rate" => cfg.migration_rate = parse_value(line, key, value)?,
                "pmp_link_rate" => cfg.pmp_link_rate = parse_value(line, key, value)?,
                "crash_rate" => cfg.crash_rate = parse_value(line, key, value)?,
                "preserve_connectivity" => cfg.preserve_connectivity = parse_value(line, key, value)?,
                "churn_period" => cfg.churn_period = parse_value(line, key, value)?,
                "epsilon" => cfg.epsilon = parse_value(line, key, value)?,
                "precision_scope" => {
                    cfg.precision_scope = match value {
                        "all_nodes" => PrecisionScope::AllNodes,
                        "initiator_only" => PrecisionScope::InitiatorOnly,
                        _ => {
                            return Err(ConfigError::Syntax {
                                line,
                                message: format!("bad value `{value}` for `{key}`"),
                            })
                        }
                    }
                }
                "repetitions" => cfg.repetitions = parse_value(line, key, value)?,
                "runs_per_topology" => cfg.runs_per_topology = parse_value(line, key, value)?,
                "base_seed" => cfg.base_seed = parse_value(line, key, value)?,
                "ack_timeout_ticks" => cfg.ack_timeout_ticks = parse_value(line, key, value)?,
                "max_hops" => cfg.max_hops = parse_value(line, key, value)?,
                "max_rounds" => cfg.max_rounds = parse_value(line, key, value)?,
                "epoch_rounds" => cfg.epoch_rounds = parse_value(line, key, value)?,
                "out" => cfg.out = (!value.is_empty()).then(|| PathBuf::from(value)),
                "round_metrics" => cfg.round_metrics = (!value.is_empty()).then(|| PathBuf::from(value)),
                _ => {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes every key in a fixed order. `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let t = &self.topology;
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let pairs: [(&str, String); 23] = [
            ("name", self.name.clone()),
            ("protocol", self.protocol.clone()),
            ("n_masters", t.n_masters.to_string()),
            ("n_slaves", t.n_slaves.to_string()),
            ("pmp_fraction", t.pmp_fraction.to_string()),
            ("max_pmp_degree", t.max_pmp_degree.to_string()),
            ("connected", t.connected.to_string()),
            ("migration_rate", self.migration_rate.to_string()),
            ("pmp_link_rate", self.pmp_link_rate.to_string()),
            ("crash_rate", self.crash_rate.to_string()),
            ("preserve_connectivity", self.preserve_connectivity.to_string()),
            ("churn_period", self.churn_period.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("precision_scope", scope_name(self.precision_scope).to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("runs_per_topology", self.runs_per_topology.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("ack_timeout_ticks", self.ack_timeout_ticks.to_string()),
            ("max_hops", self.max_hops.to_string()),
            ("max_rounds", self.max_rounds.to_string()),
            ("epoch_rounds", self.epoch_rounds.to_string()),
            ("out", path(&self.out)),
            ("round_metrics", path(&self.round_metrics)),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
