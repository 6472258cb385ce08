use std::collections::BTreeSet;

use crate::topology::NodeId;

use super::network::{Dispatch, Network};

/// Duplicate-suppressed flood. Each node forwards the payload to all of
/// its current neighbours except the one it came from, the first time it
/// sees it.
#[derive(Debug, Clone, Default)]
pub struct Flood {
    reached: BTreeSet<NodeId>,
}

impl Flood {
    pub fn start<M: Clone>(net: &mut Network<M>, origin: NodeId, payload: M) -> Self {
        let mut flood = Self::default();
        if net.is_alive(origin) {
            flood.reached.insert(origin);
            flood.forward(net, origin, None, &payload);
        }
        flood
    }

    /// Handles a delivered flood message at `to`.
    pub fn on_deliver<M: Clone>(&mut self, net: &mut Network<M>, from: NodeId, to: NodeId, payload: &M) {
        if self.reached.insert(to) {
            self.forward(net, to, Some(from), payload);
        }
    }

    fn forward<M: Clone>(&self, net: &mut Network<M>, at: NodeId, skip: Option<NodeId>, payload: &M) {
        let targets: Vec<NodeId> = match net.topology().neighbors(at) {
            Ok(it) => it.filter(|&n| Some(n) != skip).collect(),
            Err(_) => return,
        };
        for n in targets {
            net.send(at, n, payload.clone());
        }
    }

    pub fn reached(&self) -> &BTreeSet<NodeId> {
        &self.reached
    }

    pub fn into_reached(self) -> BTreeSet<NodeId> {
        self.reached
    }
}

/// Runs a flood to completion on a network carrying nothing else and
/// returns the set of nodes that received the payload, origin included.
pub fn flood_broadcast<M: Clone>(net: &mut Network<M>, origin: NodeId, payload: M) -> BTreeSet<NodeId> {
    let mut flood = Flood::start(net, origin, payload);
    while let Some(d) = net.step() {
        if let Dispatch::Message { from, to, msg } = d {
            flood.on_deliver(net, from, to, &msg);
        }
    }
    flood.into_reached()
}
