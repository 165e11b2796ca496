//! Speed planning along a fixed path.
//!
//! The pipeline searches the station-time (S-T) graph with dynamic programming,
//! turns the resulting decisions into a chain of trapezoidal safe regions, and
//! optimizes a piecewise Bezier station curve inside them with a convex QP.
//!
//! ```text
//! obstacles ──► dp::search ──► dp::extract_bounds ──► corridor::generate_regions
//!                                                          │
//!           bezier::BezierSpline ◄── qp_solve::solve ◄── qp_build::assemble
//! ```
//!
//! Every numeric type is generic over [`Scalar`]; the `*64` aliases below fix
//! the scalar to `f64`, which is what the command line front end uses.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bezier;
pub mod corridor;
pub mod dp;
pub mod linalg;
pub mod planner;
pub mod qp_build;
pub mod qp_solve;
mod scalar;
pub mod scenario;
pub mod stgraph;

pub use scalar::Scalar;

pub type ObstacleTrace64 = stgraph::ObstacleTrace<f64>;
pub type StGrid64 = stgraph::StGrid<f64>;
pub type InitialState64 = stgraph::InitialState<f64>;
pub type HeuristicProfile64 = dp::HeuristicProfile<f64>;
pub type BoundsProfile64 = dp::BoundsProfile<f64>;
pub type Region64 = corridor::Region<f64>;
pub type BezierSegment64 = bezier::BezierSegment<f64>;
pub type BezierSpline64 = bezier::BezierSpline<f64>;
pub type QpProblem64 = qp_build::QpProblem<f64>;
pub type Solution64 = qp_solve::Solution<f64>;
pub type Scenario64 = scenario::Scenario<f64>;
pub type PlannerConfig64 = planner::PlannerConfig<f64>;
pub type PlanResult64 = planner::PlanResult<f64>;
