//! Dirichlet problem for the SME on Ω_ε by Newton inside a continuation loop.

mod continuation;
mod diagnostics;
mod discretize;
mod eigen;
mod grid;
mod linear;
mod newton;

pub use continuation::{continuation_run, load_snapshot, save_snapshot, ContinuationRun, ContinuationState, Problem, SolverConfig, StepRecord};
pub use diagnostics::{c2_closeness_diagnostic, derivative_decay_check, DecayFit};
pub use discretize::{Discretization, Entry};
pub use eigen::{inverse_iteration, smallest_eigenvalue, EigenEstimate};
pub use grid::{stretch_map, DomainGrid, Field2D, Metric};
pub use linear::{Factor, SparseSolver};
pub use newton::{newton_solve, NewtonOptions, NewtonReport};
