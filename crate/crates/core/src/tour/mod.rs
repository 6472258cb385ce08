//! Random tour size estimators.
//!
//! A token leaves an originator, hops to uniformly chosen neighbours and
//! is finalized when it comes back. The baseline token sums inverse
//! degrees; the adapted token counts distinct masters and PMP nodes with
//! their degrees and applies the closed-form size formula.
//!
//! Both share one forwarding engine: each holder waits for an
//! acknowledgement from the next holder (sent once that node has forwarded
//! in turn), re-selects among unvisited, untried neighbours on timeout, and
//! routes the token home when none remain.

mod engine;
mod token;

pub use engine::{
    run_tour, run_tour_observed, select_next_hop, Completion, SelectMode, TourMsg, TourOutcome, TourParams,
};
pub use token::{
    adapted_finalize, adapted_update, baseline_finalize, baseline_step, init_adapted, init_baseline, AdaptedRules,
    AdaptedToken, BaselineRules, BaselineToken, GatheredStats, TokenRules, TourError,
};
