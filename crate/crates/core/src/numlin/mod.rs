//! Dense numerical kernels: a bounded-variable simplex LP solver, a cached
//! Cholesky solve and ordinary least squares.

mod cholesky;
mod lp;
mod ols;

pub use cholesky::{factor_and_solve, CholeskyFactor};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus, ObjectiveSense, RowSense};
pub use ols::{ols_regress, OlsFit};
