//! Bipartite master/slave topology model.
//!
//! A [`Topology`] holds m-coloured (master) and s-coloured (slave) nodes.
//! Every edge joins a master to a slave. Slaves split into PMP nodes
//! (degree > 1, bridging several piconets) and pure slaves (degree 1).
//!
//! Node ids are dense slot indices and are never reused: a crashed node
//! leaves an empty slot behind for the rest of the run.

mod churn;
mod format;
mod generate;
mod stats;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

pub use churn::{apply_change, mutate_topology, ChangeEvent, ChurnParams};
pub use format::{parse_topology, write_topology};
pub use generate::{generate_topology, GenParams};
pub use stats::{compute_stats, proposition1_estimate, proposition1_exact, GraphStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Colour {
    Master,
    Slave,
}

impl Colour {
    pub fn symbol(self) -> char {
        match self {
            Colour::Master => 'm',
            Colour::Slave => 's',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Master,
    Pmp,
    PureSlave,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Master => "master",
            Role::Pmp => "pmp",
            Role::PureSlave => "pure",
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("edge {0}-{1} would join two nodes of the same colour")]
    SameColour(NodeId, NodeId),
    #[error("edge {0}-{1} already exists")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge {0}-{1} does not exist")]
    MissingEdge(NodeId, NodeId),
    #[error("topology has no nodes")]
    Empty,
    #[error("infeasible generation parameters: {0}")]
    Infeasible(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    colour: Colour,
    adjacent: BTreeSet<NodeId>,
}

/// Mutable bipartite graph of masters and slaves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    slots: Vec<Option<Slot>>,
    live: usize,
    edges: usize,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, colour: Colour) -> NodeId {
        let id = NodeId(self.slots.len() as u32);
        self.slots.push(Some(Slot {
            colour,
            adjacent: BTreeSet::new(),
        }));
        self.live += 1;
        id
    }

    /// Places a node in a specific slot, growing capacity with empty slots.
    /// Used by the text parser, where crashed ids leave gaps.
    pub(crate) fn insert_node_at(&mut self, id: NodeId, colour: Colour) -> Result<(), TopologyError> {
        if self.slots.len() <= id.index() {
            self.slots.resize(id.index() + 1, None);
        }
        if self.slots[id.index()].is_some() {
            return Err(TopologyError::Parse {
                line: 0,
                message: format!("duplicate node {id}"),
            });
        }
        self.slots[id.index()] = Some(Slot {
            colour,
            adjacent: BTreeSet::new(),
        });
        self.live += 1;
        Ok(())
    }

    fn slot(&self, id: NodeId) -> Result<&Slot, TopologyError> {
        self.slots
            .get(id.index())
            .and_then(Option::as_ref)
            .ok_or(TopologyError::UnknownNode(id))
    }

    fn slot_mut(&mut self, id: NodeId) -> Result<&mut Slot, TopologyError> {
        self.slots
            .get_mut(id.index())
            .and_then(Option::as_mut)
            .ok_or(TopologyError::UnknownNode(id))
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<(), TopologyError> {
        let ca = self.slot(a)?.colour;
        let cb = self.slot(b)?.colour;
        if ca == cb {
            return Err(TopologyError::SameColour(a, b));
        }
        if self.slot(a)?.adjacent.contains(&b) {
            return Err(TopologyError::DuplicateEdge(a, b));
        }
        self.slot_mut(a)?.adjacent.insert(b);
        self.slot_mut(b)?.adjacent.insert(a);
        self.edges += 1;
        Ok(())
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> Result<(), TopologyError> {
        if !self.slot_mut(a)?.adjacent.remove(&b) {
            return Err(TopologyError::MissingEdge(a, b));
        }
        self.slot_mut(b)?.adjacent.remove(&a);
        self.edges -= 1;
        Ok(())
    }

    /// Removes a node and all its edges. The id is not reused.
    pub fn remove_node(&mut self, id: NodeId) -> Result<(), TopologyError> {
        let slot = self
            .slots
            .get_mut(id.index())
            .and_then(Option::take)
            .ok_or(TopologyError::UnknownNode(id))?;
        for other in &slot.adjacent {
            if let Some(Some(s)) = self.slots.get_mut(other.index()) {
                s.adjacent.remove(&id);
            }
        }
        self.edges -= slot.adjacent.len();
        self.live -= 1;
        Ok(())
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.slot(id).is_ok()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.slot(a).map(|s| s.adjacent.contains(&b)).unwrap_or(false)
    }

    pub fn colour(&self, id: NodeId) -> Result<Colour, TopologyError> {
        Ok(self.slot(id)?.colour)
    }

    pub fn degree(&self, id: NodeId) -> Result<usize, TopologyError> {
        Ok(self.slot(id)?.adjacent.len())
    }

    /// Neighbours in ascending id order.
    pub fn neighbors(&self, id: NodeId) -> Result<impl Iterator<Item = NodeId> + '_, TopologyError> {
        Ok(self.slot(id)?.adjacent.iter().copied())
    }

    pub fn classify_role(&self, id: NodeId) -> Result<Role, TopologyError> {
        let slot = self.slot(id)?;
        Ok(match slot.colour {
            Colour::Master => Role::Master,
            Colour::Slave if slot.adjacent.len() > 1 => Role::Pmp,
            Colour::Slave => Role::PureSlave,
        })
    }

    /// Live node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn masters(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes_of(Colour::Master)
    }

    pub fn slaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes_of(Colour::Slave)
    }

    fn nodes_of(&self, colour: Colour) -> impl Iterator<Item = NodeId> + '_ {
        self.slots.iter().enumerate().filter_map(move |(i, s)| match s {
            Some(slot) if slot.colour == colour => Some(NodeId(i as u32)),
            _ => None,
        })
    }

    /// Edges as `(low, high)` pairs, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |a| {
            self.slots[a.index()]
                .as_ref()
                .into_iter()
                .flat_map(|s| s.adjacent.iter().copied())
                .filter(move |&b| a < b)
                .map(move |b| (a, b))
        })
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// One past the largest id ever allocated.
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Live nodes reachable from `start`, in BFS order.
    pub fn component_of(&self, start: NodeId) -> Vec<NodeId> {
        if !self.contains(start) {
            return Vec::new();
        }
        let mut seen = vec![false; self.slots.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start.index()] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for w in self.slots[v.index()].as_ref().unwrap().adjacent.iter() {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    queue.push_back(*w);
                }
            }
        }
        order
    }

    /// True when all live nodes form a single component. The empty
    /// topology counts as connected.
    pub fn is_connected(&self) -> bool {
        match self.nodes().next() {
            None => true,
            Some(first) => self.component_of(first).len() == self.live,
        }
    }

    /// Checks the structural invariants. `require_attached` additionally
    /// demands that every slave has at least one master.
    pub fn check_invariants(&self, require_attached: bool) -> Result<(), String> {
        let mut half_edges = 0;
        for id in self.nodes() {
            let slot = self.slots[id.index()].as_ref().unwrap();
            if require_attached && slot.colour == Colour::Slave && slot.adjacent.is_empty() {
                return Err(format!("slave {id} has no master"));
            }
            for &other in &slot.adjacent {
                if other == id {
                    return Err(format!("self-loop at {id}"));
                }
                let peer = self
                    .slot(other)
                    .map_err(|_| format!("{id} adjacent to missing node {other}"))?;
                if peer.colour == slot.colour {
                    return Err(format!("edge {id}-{other} joins equal colours"));
                }
                if !peer.adjacent.contains(&id) {
                    return Err(format!("edge {id}-{other} is not symmetric"));
                }
            }
            half_edges += slot.adjacent.len();
        }
        if half_edges != 2 * self.edges {
            return Err(format!(
                "edge counter {} disagrees with adjacency ({} half-edges)",
                self.edges, half_edges
            ));
        }
        let live = self.slots.iter().filter(|s| s.is_some()).count();
        if live != self.live {
            return Err(format!("live counter {} disagrees with slots ({live})", self.live));
        }
        Ok(())
    }
}

/// The seven-node reference network used throughout the tests:
/// masters m1, m2 (ids 0, 1), PMP p1 (id 2) linked to both, pure slaves
/// s1, s2 on m1 (ids 3, 4) and s3, s4 on m2 (ids 5, 6).
pub fn reference_network() -> Topology {
    let mut t = Topology::new();
    let m1 = t.add_node(Colour::Master);
    let m2 = t.add_node(Colour::Master);
    let p1 = t.add_node(Colour::Slave);
    let s: Vec<NodeId> = (0..4).map(|_| t.add_node(Colour::Slave)).collect();
    t.add_edge(m1, p1).unwrap();
    t.add_edge(m2, p1).unwrap();
    t.add_edge(m1, s[0]).unwrap();
    t.add_edge(m1, s[1]).unwrap();
    t.add_edge(m2, s[2]).unwrap();
    t.add_edge(m2, s[3]).unwrap();
    t
}

/// A single master with `slaves` pure slaves attached.
pub fn star(slaves: usize) -> Topology {
    let mut t = Topology::new();
    let m = t.add_node(Colour::Master);
    for _ in 0..slaves {
        let s = t.add_node(Colour::Slave);
        t.add_edge(m, s).unwrap();
    }
    t
}
