//! Nonlinear ingredients of the controlled system, mild solutions and the
//! Picard fixed-point solver.

pub mod descriptors;
pub mod scenario;
mod solver;

pub use descriptors::{ControlShape, Delay, Kernel};
pub use scenario::{ControlSpec, ForcingSpec, GSpec, NamedControl, NonlocalTerm, Scenario, ScenarioConfig, Selection};
pub use solver::{
    contraction_estimate, delayed_sample, eval_forcing_selection, eval_g, eval_h, fixed_point_solve, g_pointwise,
    residual_check, ContractionEstimate, FixedPointDiagnostics, FixedPointSolution, FrozenTerms, ResidualReport,
    SolverContext, Trajectory,
};
