//! Deterministic discrete-event engine.
//!
//! One event loop per run, a virtual clock that only advances by popping
//! the queue, seeded RNG substreams, and a routing oracle standing in for
//! an ad hoc routing protocol.

mod flood;
mod network;
mod queue;
mod rng;
mod routing;

pub use flood::{flood_broadcast, Flood};
pub use network::{Dispatch, Network, HOP_LATENCY};
pub use queue::{Event, EventKind, EventQueue, SimError, Tick};
pub use rng::{SeededRng, Stream};
pub use routing::{distances_from, route_to};
