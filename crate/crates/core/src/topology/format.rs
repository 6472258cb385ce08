//! Line-oriented text form:
//!
//! ```text
//! nodes 3
//! node 0 m
//! node 1 s
//! node 2 s
//! edge 0 1
//! edge 0 2
//! ```
//!
//! Node lines come in ascending id order, edges sorted by `(low, high)`.
//! Ids may have gaps where nodes crashed.

use std::fmt::Write as _;

use super::{Colour, NodeId, Topology, TopologyError};

pub fn write_topology(topo: &Topology) -> String {
    let mut out = String::new();
    writeln!(out, "nodes {}", topo.len()).unwrap();
    for id in topo.nodes() {
        writeln!(out, "node {} {}", id, topo.colour(id).unwrap().symbol()).unwrap();
    }
    for (a, b) in topo.edges() {
        writeln!(out, "edge {a} {b}").unwrap();
    }
    out
}

pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let err = |line: usize, message: String| TopologyError::Parse { line, message };
    let mut topo = Topology::new();
    let mut declared = None;
    let mut last_node: Option<NodeId> = None;
    let mut last_edge: Option<(NodeId, NodeId)> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let id_at = |k: usize| -> Result<NodeId, TopologyError> {
            fields
                .get(k)
                .ok_or_else(|| err(lineno, "missing id".into()))?
                .parse::<u32>()
                .map(NodeId)
                .map_err(|e| err(lineno, format!("bad id: {e}")))
        };
        match fields[0] {
            "nodes" if declared.is_none() && fields.len() == 2 => {
                let n = fields[1].parse::<usize>().map_err(|e| err(lineno, format!("bad count: {e}")))?;
                declared = Some(n);
            }
            "node" if declared.is_some() && last_edge.is_none() && fields.len() == 3 => {
                let id = id_at(1)?;
                if last_node.is_some_and(|prev| prev >= id) {
                    return Err(err(lineno, format!("node {id} out of order")));
                }
                let colour = match fields[2] {
                    "m" => Colour::Master,
                    "s" => Colour::Slave,
                    other => return Err(err(lineno, format!("unknown colour {other:?}"))),
                };
                topo.insert_node_at(id, colour).map_err(|e| err(lineno, e.to_string()))?;
                last_node = Some(id);
            }
            "edge" if declared.is_some() && fields.len() == 3 => {
                let (a, b) = (id_at(1)?, id_at(2)?);
                if a >= b || last_edge.is_some_and(|prev| prev >= (a, b)) {
                    return Err(err(lineno, format!("edge {a} {b} out of order")));
                }
                topo.add_edge(a, b).map_err(|e| err(lineno, e.to_string()))?;
                last_edge = Some((a, b));
            }
            _ => return Err(err(lineno, format!("unexpected line {line:?}"))),
        }
    }
    match declared {
        None => Err(err(0, "missing `nodes` header".into())),
        Some(n) if n != topo.len() => Err(err(0, format!("header declares {n} nodes, found {}", topo.len()))),
        Some(_) => Ok(topo),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, reference_network, GenParams};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_network_golden() {
        let text = write_topology(&reference_network());
        let expected = "nodes 7\nnode 0 m\nnode 1 m\nnode 2 s\nnode 3 s\nnode 4 s\nnode 5 s\nnode 6 s\n\
                        edge 0 2\nedge 0 3\nedge 0 4\nedge 1 2\nedge 1 5\nedge 1 6\n";
        assert_eq!(text, expected);
        assert_eq!(parse_topology(&text).unwrap(), reference_network());
    }

    #[test]
    fn gaps_survive() {
        let mut t = reference_network();
        t.remove_node(NodeId(4)).unwrap();
        let back = parse_topology(&write_topology(&t)).unwrap();
        assert_eq!(write_topology(&back), write_topology(&t));
        assert!(!back.contains(NodeId(4)));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_topology("node 0 m\n").is_err());
        assert!(parse_topology("nodes 2\nnode 1 m\nnode 0 s\n").is_err());
        assert!(parse_topology("nodes 2\nnode 0 m\nnode 1 m\nedge 0 1\n").is_err());
        assert!(parse_topology("nodes 2\nnode 0 m\nnode 1 x\n").is_err());
        assert!(parse_topology("nodes 3\nnode 0 m\nnode 1 s\n").is_err());
        assert!(parse_topology("nodes 2\nnode 0 m\nnode 1 s\nedge 1 0\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(seed in any::<u64>(), masters in 1usize..8, slaves in 0usize..30) {
            let params = GenParams { n_masters: masters, n_slaves: slaves.max(masters), pmp_fraction: 0.4, max_pmp_degree: 3, connected: false };
            let t = generate_topology(&mut ChaCha8Rng::seed_from_u64(seed), &params).unwrap();
            let text = write_topology(&t);
            let back = parse_topology(&text).unwrap();
            prop_assert_eq!(write_topology(&back), text);
        }
    }
}
