//! Drivers behind the `fracreach` CLI.

mod invariants;
mod linear;
mod sweep;

pub use invariants::{run_invariant_suite, InvariantResult, InvariantSummary, Suite};
pub use linear::{linear_check, run_linear_check, predicted_terminal_error, Check, LinearCheckReport};
pub use sweep::{format_float, run_lambda_sweep, sweep, SweepOutputs, SweepResult, SweepRow, CSV_HEADER};
