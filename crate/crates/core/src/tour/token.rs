use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::topology::{proposition1_exact, NodeId, Role, Topology, TopologyError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TourError {
    #[error("originator {0} is isolated")]
    Isolated(NodeId),
    #[error("originator {0} is not a master")]
    NotMaster(NodeId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Statistics carried home by an adapted tour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatheredStats {
    pub n_masters: u64,
    pub avg_deg_masters: f64,
    pub n_pmp: u64,
    pub avg_deg_pmp: f64,
}

/// Token of the inverse-degree random tour. `visited` and `hops` are only
/// read by the recovery procedure; the estimate depends on `x` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineToken {
    pub originator: NodeId,
    pub origin_degree: u64,
    pub x: f64,
    pub visited: BTreeSet<NodeId>,
    pub hops: u64,
}

pub fn init_baseline(topo: &Topology, originator: NodeId) -> Result<BaselineToken, TourError> {
    let degree = topo.degree(originator)? as u64;
    if degree == 0 {
        return Err(TourError::Isolated(originator));
    }
    Ok(BaselineToken {
        originator,
        origin_degree: degree,
        x: 1.0 / degree as f64,
        visited: BTreeSet::from([originator]),
        hops: 0,
    })
}

/// Receipt at a non-originator holder: `x += 1/d`.
pub fn baseline_step(mut token: BaselineToken, holder_degree: u64) -> BaselineToken {
    // A holder whose links vanished while it held the token still counts
    // as degree one, keeping the counter strictly increasing.
    token.x += 1.0 / holder_degree.max(1) as f64;
    token
}

/// `d_i · X` once the token is home.
pub fn baseline_finalize(token: &BaselineToken) -> f64 {
    token.origin_degree as f64 * token.x
}

/// Token of the master/slave tour: distinct masters and PMP nodes seen so
/// far, with their summed degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedToken {
    pub originator: NodeId,
    pub tour_id: u64,
    pub n_m: u64,
    pub d_m_sum: u64,
    pub n_p: u64,
    pub d_p_sum: u64,
    pub visited: BTreeSet<NodeId>,
    pub hops: u64,
}

impl fmt::Display for AdaptedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{({},{}),({},{})}}", self.n_m, self.d_m_sum, self.n_p, self.d_p_sum)
    }
}

pub fn init_adapted(topo: &Topology, originator: NodeId, tour_id: u64) -> Result<AdaptedToken, TourError> {
    if topo.classify_role(originator)? != Role::Master {
        return Err(TourError::NotMaster(originator));
    }
    Ok(AdaptedToken {
        originator,
        tour_id,
        n_m: 1,
        d_m_sum: topo.degree(originator)? as u64,
        n_p: 0,
        d_p_sum: 0,
        visited: BTreeSet::from([originator]),
        hops: 0,
    })
}

/// Counts `holder` on its first visit only. The size formula needs the
/// number of distinct masters and PMPs; counting revisits would inflate
/// both.
pub fn adapted_update(mut token: AdaptedToken, holder: NodeId, role: Role, degree: u64) -> AdaptedToken {
    if token.visited.insert(holder) {
        match role {
            Role::Master => {
                token.n_m += 1;
                token.d_m_sum += degree;
            }
            Role::Pmp => {
                token.n_p += 1;
                token.d_p_sum += degree;
            }
            Role::PureSlave => {}
        }
    }
    token
}

/// Averages the gathered degrees (`D_m/N_m`, `D_p/N_p`) and applies the
/// closed-form size formula. The arithmetic is exact, so a tour that saw
/// every master and PMP node returns the size without rounding error.
pub fn adapted_finalize(token: &AdaptedToken) -> (f64, GatheredStats) {
    let avg_m = token.d_m_sum as f64 / token.n_m as f64;
    let avg_p = if token.n_p == 0 {
        0.0
    } else {
        token.d_p_sum as f64 / token.n_p as f64
    };
    let stats = GatheredStats {
        n_masters: token.n_m,
        avg_deg_masters: avg_m,
        n_pmp: token.n_p,
        avg_deg_pmp: avg_p,
    };
    let exact_p = if token.n_p == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(token.d_p_sum as i64, token.n_p as i64)
    };
    let n = proposition1_exact(
        token.n_m,
        Ratio::new(token.d_m_sum as i64, token.n_m as i64),
        token.n_p,
        exact_p,
    );
    (n.to_f64().unwrap_or(f64::NAN), stats)
}

/// The per-variant half of the tour protocol: how a token starts, what a
/// holder does to it, and how the originator turns it into an estimate.
/// The forwarding, acknowledgement and recovery machinery is shared.
pub trait TokenRules {
    type Token: Clone + fmt::Debug;

    fn name(&self) -> &'static str;

    fn init(&self, topo: &Topology, originator: NodeId, tour_id: u64) -> Result<Self::Token, TourError>;

    /// Receipt at a holder other than the originator.
    fn visit(&self, token: Self::Token, holder: NodeId, role: Role, degree: u64) -> Self::Token;

    fn visited<'a>(&self, token: &'a Self::Token) -> &'a BTreeSet<NodeId>;

    fn hops(&self, token: &Self::Token) -> u64;

    fn finalize(&self, token: &Self::Token) -> (f64, Option<GatheredStats>);

    /// Counter fields for trace lines.
    fn counters(&self, token: &Self::Token) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineRules;

impl TokenRules for BaselineRules {
    type Token = BaselineToken;

    fn name(&self) -> &'static str {
        "baseline"
    }

    fn init(&self, topo: &Topology, originator: NodeId, _tour_id: u64) -> Result<BaselineToken, TourError> {
        init_baseline(topo, originator)
    }

    fn visit(&self, token: BaselineToken, holder: NodeId, _role: Role, degree: u64) -> BaselineToken {
        let mut token = baseline_step(token, degree);
        token.visited.insert(holder);
        token.hops += 1;
        token
    }

    fn visited<'a>(&self, token: &'a BaselineToken) -> &'a BTreeSet<NodeId> {
        &token.visited
    }

    fn hops(&self, token: &BaselineToken) -> u64 {
        token.hops
    }

    fn finalize(&self, token: &BaselineToken) -> (f64, Option<GatheredStats>) {
        (baseline_finalize(token), None)
    }

    fn counters(&self, token: &BaselineToken) -> String {
        format!("{}", token.x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AdaptedRules;

impl TokenRules for AdaptedRules {
    type Token = AdaptedToken;

    fn name(&self) -> &'static str {
        "adapted"
    }

    fn init(&self, topo: &Topology, originator: NodeId, tour_id: u64) -> Result<AdaptedToken, TourError> {
        init_adapted(topo, originator, tour_id)
    }

    fn visit(&self, token: AdaptedToken, holder: NodeId, role: Role, degree: u64) -> AdaptedToken {
        let mut token = adapted_update(token, holder, role, degree);
        token.hops += 1;
        token
    }

    fn visited<'a>(&self, token: &'a AdaptedToken) -> &'a BTreeSet<NodeId> {
        &token.visited
    }

    fn hops(&self, token: &AdaptedToken) -> u64 {
        token.hops
    }

    fn finalize(&self, token: &AdaptedToken) -> (f64, Option<GatheredStats>) {
        let (estimate, stats) = adapted_finalize(token);
        (estimate, Some(stats))
    }

    fn counters(&self, token: &AdaptedToken) -> String {
        format!("{} {} {} {}", token.n_m, token.d_m_sum, token.n_p, token.d_p_sum)
    }
}
