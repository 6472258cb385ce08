use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{Colour, NodeId, Topology, TopologyError};

/// Parameters for random master/slave topology generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub n_masters: usize,
    pub n_slaves: usize,
    /// Fraction of slaves promoted to PMP nodes, rounded to the nearest count.
    pub pmp_fraction: f64,
    pub max_pmp_degree: usize,
    /// Require a single connected component.
    pub connected: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n_masters: 4,
            n_slaves: 16,
            pmp_fraction: 0.25,
            max_pmp_degree: 3,
            connected: true,
        }
    }
}

impl GenParams {
    /// Number of PMP nodes the generator will create. Always zero with a
    /// single master since a PMP needs two distinct masters.
    pub fn pmp_count(&self) -> usize {
        if self.n_masters < 2 {
            return 0;
        }
        ((self.pmp_fraction * self.n_slaves as f64).round() as usize).min(self.n_slaves)
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let infeasible = |msg: String| Err(TopologyError::Infeasible(msg));
        if self.n_masters == 0 {
            return infeasible("n_masters must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.pmp_fraction) {
            return infeasible(format!("pmp_fraction {} outside [0, 1]", self.pmp_fraction));
        }
        if self.max_pmp_degree < 2 {
            return infeasible(format!("max_pmp_degree {} below 2", self.max_pmp_degree));
        }
        if self.connected && self.n_masters > 1 {
            let bridges = self.pmp_count() * (self.max_pmp_degree.min(self.n_masters) - 1);
            if bridges < self.n_masters - 1 {
                return infeasible(format!(
                    "connectivity needs {} master bridges but {} PMPs of degree <= {} provide {}",
                    self.n_masters - 1,
                    self.pmp_count(),
                    self.max_pmp_degree,
                    bridges
                ));
            }
        }
        Ok(())
    }

    pub fn n_total(&self) -> usize {
        self.n_masters + self.n_slaves
    }
}

/// Builds a random topology: masters first, then PMP nodes (spanning the
/// masters when connectivity is required), then pure slaves attached with
/// probability proportional to `1 + degree` of each master.
///
/// Masters take ids `0..n_masters`; slaves follow.
pub fn generate_topology<R: Rng + ?Sized>(rng: &mut R, params: &GenParams) -> Result<Topology, TopologyError> {
    params.validate()?;
    let mut topo = Topology::new();
    let masters: Vec<NodeId> = (0..params.n_masters).map(|_| topo.add_node(Colour::Master)).collect();
    let mut slaves: Vec<NodeId> = (0..params.n_slaves).map(|_| topo.add_node(Colour::Slave)).collect();
    slaves.shuffle(rng);

    let n_pmp = params.pmp_count();
    let (pmps, pures) = slaves.split_at(n_pmp);
    let degree_cap = params.max_pmp_degree.min(params.n_masters);

    let mut pmp_iter = pmps.iter().copied();
    if params.connected && params.n_masters > 1 {
        // Random spanning tree over masters, each PMP joining one master
        // already in the tree to one or more new ones.
        let mut order = masters.clone();
        order.shuffle(rng);
        let mut joined = 1;
        let mut remaining_pmps = n_pmp;
        while joined < order.len() {
            let pmp = pmp_iter.next().expect("validated bridge budget");
            let left = order.len() - joined;
            let fresh = left.div_ceil(remaining_pmps).clamp(1, degree_cap - 1);
            let anchor = order[rng.gen_range(0..joined)];
            topo.add_edge(pmp, anchor)?;
            for &m in &order[joined..joined + fresh] {
                topo.add_edge(pmp, m)?;
            }
            joined += fresh;
            remaining_pmps -= 1;
        }
    }
    for pmp in pmp_iter {
        let degree = rng.gen_range(2..=degree_cap);
        for &m in masters.choose_multiple(rng, degree) {
            topo.add_edge(pmp, m)?;
        }
    }

    for &slave in pures {
        let weights: Vec<usize> = masters.iter().map(|&m| 1 + topo.degree(m).unwrap_or(0)).collect();
        let pick = WeightedIndex::new(&weights).expect("positive weights");
        topo.add_edge(slave, masters[pick.sample(rng)])?;
    }
    Ok(topo)
}
