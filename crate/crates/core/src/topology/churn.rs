use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

use super::{Colour, NodeId, Role, Topology};

/// Per-node probabilities applied at every churn tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnParams {
    /// Probability that a pure slave moves to another master.
    pub migration_rate: f64,
    /// Probability that a slave gains or loses a master link (PMP churn).
    pub pmp_link_rate: f64,
    /// Probability that a node crashes.
    pub crash_rate: f64,
    pub max_pmp_degree: usize,
    /// Roll back any change that would split the network.
    pub preserve_connectivity: bool,
}

impl ChurnParams {
    pub fn none() -> Self {
        Self {
            migration_rate: 0.0,
            pmp_link_rate: 0.0,
            crash_rate: 0.0,
            max_pmp_degree: 3,
            preserve_connectivity: true,
        }
    }

    pub fn is_static(&self) -> bool {
        self.migration_rate == 0.0 && self.pmp_link_rate == 0.0 && self.crash_rate == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChangeEvent {
    Migrate { node: NodeId, from: NodeId, to: NodeId },
    LinkAdd { slave: NodeId, master: NodeId },
    LinkDrop { slave: NodeId, master: NodeId },
    /// A crashed node and the orphaned pure slaves removed with it.
    Crash { node: NodeId, orphans: Vec<NodeId> },
}

const RETRIES: usize = 3;

/// Applies one churn tick. Nodes are visited in ascending id order; each
/// draws its migration, link and crash trials independently. Changes that
/// would disconnect the network are rolled back and retried with a fresh
/// target up to three times when `preserve_connectivity` is set.
pub fn mutate_topology<R: Rng + ?Sized>(topo: &mut Topology, rng: &mut R, churn: &ChurnParams) -> Vec<ChangeEvent> {
    let mut applied = Vec::new();
    if churn.is_static() {
        return applied;
    }
    let candidates: Vec<NodeId> = topo.nodes().collect();
    for node in candidates {
        if !topo.contains(node) {
            continue;
        }
        let colour = topo.colour(node).unwrap();
        if colour == Colour::Slave
            && rng.gen_bool(churn.migration_rate)
            && topo.classify_role(node) == Ok(Role::PureSlave)
        {
            attempt(topo, churn, &mut applied, |t| migrate(t, rng, node));
        }
        if colour == Colour::Slave && rng.gen_bool(churn.pmp_link_rate) {
            let add = rng.gen_bool(0.5);
            attempt(topo, churn, &mut applied, |t| {
                if add {
                    link_add(t, rng, node, churn.max_pmp_degree)
                } else {
                    link_drop(t, rng, node)
                }
            });
        }
        if rng.gen_bool(churn.crash_rate) {
            // Crashes have a single candidate, so no resampling.
            let snapshot = topo.clone();
            if let Some(ev) = crash(topo, node, churn.preserve_connectivity) {
                if churn.preserve_connectivity && !topo.is_connected() {
                    *topo = snapshot;
                } else {
                    applied.push(ev);
                }
            }
        }
    }
    applied
}

fn attempt<F>(topo: &mut Topology, churn: &ChurnParams, applied: &mut Vec<ChangeEvent>, mut change: F)
where
    F: FnMut(&mut Topology) -> Option<ChangeEvent>,
{
    for _ in 0..RETRIES {
        let snapshot = churn.preserve_connectivity.then(|| topo.clone());
        match change(topo) {
            None => return,
            Some(ev) => match snapshot {
                Some(s) if !topo.is_connected() => *topo = s,
                _ => {
                    applied.push(ev);
                    return;
                }
            },
        }
    }
}

fn migrate<R: Rng + ?Sized>(topo: &mut Topology, rng: &mut R, node: NodeId) -> Option<ChangeEvent> {
    let from = topo.neighbors(node).ok()?.next()?;
    let to = topo.masters().filter(|&m| m != from).choose(rng)?;
    topo.remove_edge(node, from).ok()?;
    topo.add_edge(node, to).ok()?;
    Some(ChangeEvent::Migrate { node, from, to })
}

fn link_add<R: Rng + ?Sized>(topo: &mut Topology, rng: &mut R, slave: NodeId, max_degree: usize) -> Option<ChangeEvent> {
    if topo.degree(slave).ok()? >= max_degree {
        return None;
    }
    let master = topo.masters().filter(|&m| !topo.has_edge(slave, m)).choose(rng)?;
    topo.add_edge(slave, master).ok()?;
    Some(ChangeEvent::LinkAdd { slave, master })
}

fn link_drop<R: Rng + ?Sized>(topo: &mut Topology, rng: &mut R, slave: NodeId) -> Option<ChangeEvent> {
    if topo.degree(slave).ok()? < 2 {
        return None;
    }
    let links: Vec<NodeId> = topo.neighbors(slave).ok()?.collect();
    let master = *links.choose(rng)?;
    topo.remove_edge(slave, master).ok()?;
    Some(ChangeEvent::LinkDrop { slave, master })
}

/// Removes `node`. A crashing master takes its pure slaves with it when
/// `drop_orphans` is set, since they would be left without any master.
fn crash(topo: &mut Topology, node: NodeId, drop_orphans: bool) -> Option<ChangeEvent> {
    let mut orphans = Vec::new();
    if drop_orphans && topo.colour(node).ok()? == Colour::Master {
        orphans = topo
            .neighbors(node)
            .ok()?
            .filter(|&s| topo.degree(s) == Ok(1))
            .collect();
    }
    topo.remove_node(node).ok()?;
    for &o in &orphans {
        topo.remove_node(o).ok()?;
    }
    Some(ChangeEvent::Crash { node, orphans })
}

/// Applies a specific change, bypassing randomness. Used for scripted
/// scenarios. Returns false if the change is not applicable.
pub fn apply_change(topo: &mut Topology, change: &ChangeEvent) -> bool {
    match change {
        ChangeEvent::Migrate { node, from, to } => {
            topo.remove_edge(*node, *from).is_ok() && topo.add_edge(*node, *to).is_ok()
        }
        ChangeEvent::LinkAdd { slave, master } => topo.add_edge(*slave, *master).is_ok(),
        ChangeEvent::LinkDrop { slave, master } => topo.remove_edge(*slave, *master).is_ok(),
        ChangeEvent::Crash { node, orphans } => {
            let ok = topo.remove_node(*node).is_ok();
            for o in orphans {
                let _ = topo.remove_node(*o);
            }
            ok
        }
    }
}
