//! Sturmian eigenproblems `H φ = λ W φ` with non-Hermitian weights: contour
//! discretization, left/right eigenpairs, metric operators `Θ` that make the
//! pencil quasi-Hermitian, and a residual suite that checks the whole chain.

pub mod analytic;
pub mod assembly;
pub mod contour;
pub mod eigensolve;
pub mod error;
pub mod linalg;
pub mod matrix_io;
pub mod metric;
pub mod verify;

pub use faer::c64;

pub use assembly::{assemble_kinetic, assemble_pencil, OperatorPencil, ProblemSpec, WeightKind};
pub use contour::{make_grid, ContourKind, ContourSpec, Grid};
pub use eigensolve::{biorthonormalize, classify_reality, solve_pencil, Normalization, SolverOptions, Spectrum};
pub use error::{Error, Result};
pub use metric::{build_bundle, MetricBundle, MetricOptions};
pub use verify::{convergence_study, run_suite, VerificationReport, VerifyOptions};
