//! Numerical toolkit for approximate controllability of nonlocal fractional
//! delay control systems on `L²[0, π]`.
//!
//! The crate is organised bottom-up:
//!
//! * [`special_fn`]: Gamma, two-parameter Mittag-Leffler and the Wright-type
//!   density that defines the fractional propagators.
//! * [`spectral`]: Dirichlet sine basis, fractional powers of the generator
//!   and the `H_q` norms.
//! * [`grid`], [`quadrature`], [`fracops`]: uniform time grids, product
//!   integration for weakly singular kernels, fractional integral, Caputo
//!   derivative and the diagonal propagators `S_α(t)`, `T_α(t)`.
//! * [`grammian`]: controllability Gramians, resolvents and the regularized
//!   control law.
//! * [`dynamics`]: scenario description, mild solutions and the Picard
//!   fixed-point solver.
//! * [`experiments`]: λ-sweeps, the linear controllability check and the
//!   batch invariant suite driven by the `fracreach` CLI.

pub mod adaptive;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fracops;
pub mod grammian;
pub mod grid;
pub mod quadrature;
pub mod special_fn;
pub mod spectral;

pub use dynamics::{
    contraction_estimate, fixed_point_solve, FixedPointDiagnostics, FixedPointSolution, Scenario,
    Trajectory,
};
pub use error::{Error, Result};
pub use grammian::{ControlLaw, ControlOperator, ControlPair, Gramian, GramianKind};
pub use grid::{SampledSignal, TimeGrid};
pub use special_fn::{FractionalOrder, MLParams};
pub use spectral::{SobolevIndex, SpectralOperator, SpectralState};
