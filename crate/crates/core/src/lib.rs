//! Earthquake damage simulation and repair-crew dispatch for radial
//! distribution grids.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`grid`] loads and validates a network description.
//! 2. [`seismic`] turns an earthquake event into site ground motion and
//!    component failure probabilities.
//! 3. [`scenario`] samples Monte Carlo damage scenarios, scores them and
//!    reduces them to a small weighted representative set.
//! 4. [`powerflow`] evaluates energization and optimal load shedding over a
//!    restoration timeline.
//! 5. [`dispatch`], [`ga`] and [`policy`] compute repair-crew routes with an
//!    exact solver, a genetic algorithm and an attention policy trained with
//!    PPO respectively.
//! 6. [`report`] and [`pipeline`] write comparison tables, resilience curves
//!    and reproducible artifact directories.
//!
//! Runnable walkthroughs for each stage live in the crate's `examples/`
//! directory (`cargo run --release --example <name>`).

pub mod config;
pub mod dispatch;
pub mod error;
pub mod ga;
pub mod grid;
pub mod pipeline;
pub mod policy;
pub mod powerflow;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod seismic;

pub use error::{Error, Result};
