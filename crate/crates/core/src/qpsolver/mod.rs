//! Sparse convex QP solver: CSC storage, sparse LDLᵀ factorization, and an
//! operator-splitting (ADMM) iteration with warm starting.
//!
//! The problem form is `min ½ zᵀPz + qᵀz  s.t.  l ≤ Gz ≤ u`; equality
//! constraints are rows with `l = u` and get a stiffer penalty weight so
//! dynamics constraints are enforced tightly.

pub mod admm;
pub mod ldlt;
pub mod sparse;

pub use admm::{kkt_check, solve, KktReport, QPProblem, QPSolution, SolveOptions, SolveStatus};
pub use ldlt::LdltFactor;
pub use sparse::CscMatrix;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("ill-posed QP: {0}")]
    BadProblem(String),
    #[error("LDL^T factorization failed: zero pivot at column {0}")]
    ZeroPivot(usize),
    #[error("matrix is not upper triangular (entry at row {row}, col {col})")]
    NotUpperTriangular { row: usize, col: usize },
}
