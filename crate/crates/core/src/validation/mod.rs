//! Statistical and algebraic checks of the theorem-level properties:
//! martingale z-tests, moment bounds, coupled continuity experiments, trace
//! inequalities, step-halving and convergence-order estimates.

pub mod bounds;
pub mod continuity;
pub mod convergence;
pub mod halving;
pub mod inequalities;
pub mod martingale;
pub mod stats;
pub mod suite;

pub use bounds::{moment_bound_check, BoundCheckResult, BoundConfig, BoundKind, InitialState};
pub use continuity::{hamiltonian_continuity_experiment, ContinuityConfig, ContinuityReport};
pub use convergence::{convergence_order, ConvergenceConfig, ConvergenceReport, StepperKind};
pub use halving::{ensemble_equivalence, pure_mixed_consistency, transform_residual, HalvingConfig, HalvingReport};
pub use inequalities::{inequality_sweep, trace_inequality_check, InequalityResult};
pub use martingale::{martingale_test, MartingaleTestResult};
pub use suite::{run_suite, CheckReport, Suite, SuiteOptions, SuiteReport};
