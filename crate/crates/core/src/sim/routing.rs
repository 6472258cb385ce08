use std::collections::VecDeque;

use crate::topology::{NodeId, Topology};

/// Shortest hop-count path from `from` to `to` over the current topology,
/// both endpoints included. Among equally short paths the one with the
/// smallest next hop at every step wins. `None` when disconnected.
///
/// This stands in for an ad hoc routing protocol: it sees the topology as
/// it is right now and nothing else.
pub fn route_to(topo: &Topology, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
    if !topo.contains(from) || !topo.contains(to) {
        return None;
    }
    let dist = distances_from(topo, to);
    dist[from.index()]?;
    let mut path = vec![from];
    let mut here = from;
    while here != to {
        let d = dist[here.index()].unwrap();
        here = topo
            .neighbors(here)
            .ok()?
            .find(|n| dist[n.index()] == Some(d - 1))
            .expect("BFS layer has a predecessor");
        path.push(here);
    }
    Some(path)
}

/// Hop distance from `source` to every slot, `None` when unreachable.
pub fn distances_from(topo: &Topology, source: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; topo.capacity()];
    if !topo.contains(source) {
        return dist;
    }
    dist[source.index()] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v.index()].unwrap();
        for w in topo.neighbors(v).unwrap() {
            if dist[w.index()].is_none() {
                dist[w.index()] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}
