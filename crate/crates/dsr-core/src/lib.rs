//! Planning engine for post-disaster distribution-grid restoration.
//!
//! Co-optimizes repair-crew dispatch, emergency-communication-vehicle (ECV)
//! routing and grid switching. The library builds solver-agnostic MILP models
//! (with and without communication agents), writes them as free-format MPS for
//! off-the-shelf solvers, provides rule-based planners plus an exhaustive
//! optimality oracle for small instances, and ships an independent timeline
//! simulator/validator that evaluates and certifies any restoration plan.

pub mod cluster;
pub mod coverage;
pub mod milp;
pub mod mps;
pub mod plan;
pub mod planner;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod topology;

pub use coverage::CoverageMap;
pub use plan::RestorationPlan;
pub use scenario::{load_scenario, Scenario};
pub use sim::{evaluate, objectives, restored_curve, validate, ObjectiveReport, Timeline};
pub use topology::{partition_cells, CellGraph};

/// Comparison tolerance for time/objective equalities, mirroring the MILP
/// feasibility tolerances of common solvers.
pub const TIME_EPS: f64 = 1e-6;
