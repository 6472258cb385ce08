use num_rational::Ratio;

use super::{Role, Topology, TopologyError};

/// Counts and average degrees of a topology, computed by enumeration.
///
/// Degree sums are kept alongside the float averages so that the exact
/// rational averages can be recovered without rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub n_total: u64,
    pub n_masters: u64,
    pub n_slaves: u64,
    pub n_pmp: u64,
    pub n_pure: u64,
    pub avg_deg_masters: f64,
    pub avg_deg_slaves: f64,
    /// 0 when there are no PMP nodes.
    pub avg_deg_pmp: f64,
    pub edge_count: u64,
    pub master_degree_sum: u64,
    pub slave_degree_sum: u64,
    pub pmp_degree_sum: u64,
}

fn ratio(sum: u64, count: u64) -> Ratio<i64> {
    if count == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(sum as i64, count as i64)
    }
}

fn mean(sum: u64, count: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

impl GraphStats {
    pub fn exact_avg_deg_masters(&self) -> Ratio<i64> {
        ratio(self.master_degree_sum, self.n_masters)
    }

    pub fn exact_avg_deg_slaves(&self) -> Ratio<i64> {
        ratio(self.slave_degree_sum, self.n_slaves)
    }

    pub fn exact_avg_deg_pmp(&self) -> Ratio<i64> {
        ratio(self.pmp_degree_sum, self.n_pmp)
    }

    /// Applies the closed-form size formula to these statistics, exactly.
    pub fn exact_size_estimate(&self) -> Ratio<i64> {
        proposition1_exact(
            self.n_masters,
            self.exact_avg_deg_masters(),
            self.n_pmp,
            self.exact_avg_deg_pmp(),
        )
    }
}

pub fn compute_stats(topo: &Topology) -> Result<GraphStats, TopologyError> {
    if topo.is_empty() {
        return Err(TopologyError::Empty);
    }
    let (mut m, mut p, mut ps) = (0u64, 0u64, 0u64);
    let (mut dm, mut ds, mut dp) = (0u64, 0u64, 0u64);
    for id in topo.nodes() {
        let d = topo.degree(id)? as u64;
        match topo.classify_role(id)? {
            Role::Master => {
                m += 1;
                dm += d;
            }
            Role::Pmp => {
                p += 1;
                dp += d;
                ds += d;
            }
            Role::PureSlave => {
                ps += 1;
                ds += d;
            }
        }
    }
    let s = p + ps;
    Ok(GraphStats {
        n_total: m + s,
        n_masters: m,
        n_slaves: s,
        n_pmp: p,
        n_pure: ps,
        avg_deg_masters: mean(dm, m),
        avg_deg_slaves: mean(ds, s),
        avg_deg_pmp: mean(dp, p),
        edge_count: topo.edge_count() as u64,
        master_degree_sum: dm,
        slave_degree_sum: ds,
        pmp_degree_sum: dp,
    })
}

/// `M·(d̄m + 1) − P·(d̄p − 1)` in double precision. A negative result is
/// returned as-is.
pub fn proposition1_estimate(masters: u64, avg_deg_masters: f64, pmps: u64, avg_deg_pmp: f64) -> f64 {
    masters as f64 * (avg_deg_masters + 1.0) - pmps as f64 * (avg_deg_pmp - 1.0)
}

/// Exact rational form of [`proposition1_estimate`].
pub fn proposition1_exact(
    masters: u64,
    avg_deg_masters: Ratio<i64>,
    pmps: u64,
    avg_deg_pmp: Ratio<i64>,
) -> Ratio<i64> {
    let one = Ratio::from_integer(1);
    Ratio::from_integer(masters as i64) * (avg_deg_masters + one)
        - Ratio::from_integer(pmps as i64) * (avg_deg_pmp - one)
}
