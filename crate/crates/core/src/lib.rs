//! Simulation library for communication-free multi-player bandits.
//!
//! The pieces fit together as follows:
//!
//! - [`dop`]: doubly ordered partitions and the tree they form; the state
//!   space every player navigates.
//! - [`partition`]: the gap-adaptive map from estimated means in `[0,1]^K`
//!   to a tree vertex, with a blue-region early exit for large gaps and
//!   padded skeleton bands that keep nearby inputs at adjacent vertices.
//! - [`coloring`]: a collision-robust slot assignment per vertex, so players
//!   at adjacent vertices never pick the same arm in different slots.
//! - [`strategy`]: per-player state, phase schedules, and the act/observe
//!   loop tying the partition and coloring together.
//! - [`environment`]: Bernoulli instances, collision semantics, feedback
//!   models, and regret accounting.
//! - [`lowerbound`]: an exact transfer-matrix verifier for the cyclic
//!   labeling obstruction that rules out collision-free optimal play.
//! - [`harness`]: trials, gap sweeps, invariant monitors, CSV/SVG output.

pub mod coloring;
pub mod dop;
pub mod environment;
pub mod error;
pub mod harness;
pub mod lowerbound;
pub mod partition;
pub mod strategy;

pub use error::{Error, Result};
