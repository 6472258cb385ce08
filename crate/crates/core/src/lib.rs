//! Network size estimation for master/slave mobile ad hoc networks.
//!
//! Two families of estimators run on a deterministic discrete-event
//! simulator:
//!
//! - random tours: a token walks from a master and back, either summing
//!   inverse degrees (baseline) or counting masters, PMP nodes and their
//!   degrees for the closed-form size formula (adapted);
//! - gossip aggregation: a unit mass is averaged across the network until
//!   every node reads `1/avg ≈ N`, either by pairwise exchange (baseline) or
//!   by whole-piconet averaging at each master (adapted).
//!
//! Estimators are registered by name in [`experiment::Registry`] and
//! driven by [`experiment::run_batch`].

pub mod experiment;
pub mod gossip;
pub mod sim;
pub mod topology;
pub mod tour;

pub use topology::{NodeId, Role, Topology};
