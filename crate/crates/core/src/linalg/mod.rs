//! Sparse storage and the solvers used throughout: Jacobi-CG, envelope Cholesky,
//! and constrained (saddle-point) solves.

mod cg;
mod cholesky;
mod saddle;
mod sparse;

pub use cg::{cg_solve, JacobiCg, SolveReport};
pub use cholesky::EnvelopeCholesky;
pub use saddle::{
    saddle_solve, SaddleMethod, SaddleOptions, SaddleSystem, DENSE_KKT_LIMIT, ENVELOPE_LIMIT, RANK_TOL,
};
pub use sparse::{dot, energy_norm, l2_norm, norm2, norm_inf, SparseMatrix};
