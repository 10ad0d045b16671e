//! Network operation under partial damage.
//!
//! Energization is resolved from connectivity, after which the linearized
//! distribution-flow shedding model is a plain LP solved by [`simplex`].

mod energize;
mod linearize;
mod shedding;
pub mod simplex;
mod timeline;

use thiserror::Error;

pub use energize::{energization_state, OperationalState};
pub use linearize::{
    branch_flow_rows, linearize_triple_product, BigMBranchRows, LinearConstraint, Sense,
    TripleProductLinearization, DEFAULT_BIG_M,
};
pub use shedding::{solve_shedding_lp, FlowSolution};
pub use timeline::{
    ens_timeline, resilience_curve, write_resilience_csv, RepairSchedule, RestorationTimeline,
    TimelineStep,
};

#[derive(Debug, Error)]
pub enum PowerFlowError {
    /// The all-shed point is always feasible, so this indicates a modelling
    /// defect rather than a property of the input.
    #[error("shedding LP infeasible at step {step}: {source}")]
    Infeasible {
        step: usize,
        #[source]
        source: simplex::LpError,
    },
    #[error("shedding LP failed at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: simplex::LpError,
    },
    #[error("component status has {got} entries, network has {expected}")]
    StatusLength { expected: usize, got: usize },
    #[error("failed component \"{0}\" has no repair step in the schedule")]
    Unscheduled(String),
}
