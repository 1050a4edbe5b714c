//! Difficulty-based routing between the fast and accurate backends.
//!
//! A pair whose predicted score is at least the threshold is considered easy
//! and goes to the fast backend; everything else goes to the accurate one.

mod route;
mod sweep;

pub use route::{choose, route, validate_threshold, Routed, Router, RoutingDecision};
pub use sweep::{
    evaluate_pairs, parse_thresholds, sweep, sweep_evaluations, BackendRun, PairEvaluation,
    SweepReport, SweepRow,
};
