//! Dense complex linear algebra and quantum-state primitives.

mod linalg;
mod operators;
mod state;

pub use linalg::{
    devectorize, is_hermitian, partial_trace, real_embed, real_embed_vec, real_unembed_vec,
    vectorize, Subsystem,
};
pub use operators::{standard_operator, OperatorKind};
pub use state::{fidelity, state_norm_identity_check, QuantumState};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Tolerance for Hermiticity checks on density matrices and Hamiltonians.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Slack allowed on density-matrix eigenvalues before a state is rejected.
pub const PSD_TOL: f64 = 1e-9;
/// Tolerance on `|trace(rho) - 1|` for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, thiserror::Error)]
pub enum QcoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian within tolerance {tol} (max deviation {max_dev})")]
    NotHermitian { tol: f64, max_dev: f64 },
    #[error("matrix is not positive semidefinite within tolerance {tol} (min eigenvalue {min_eig})")]
    NotPsd { tol: f64, min_eig: f64 },
    #[error("trace is {trace} but must be 1 within {tol}")]
    BadTrace { trace: f64, tol: f64 },
    #[error("non-finite entry encountered")]
    NonFinite,
}

/// Indices of the population components `Re(rho_jj)` inside the real
/// embedded state vector of an `n`-level system.
pub fn population_indices(n: usize) -> Vec<usize> {
    (0..n).map(|j| 2 * (j * n + j)).collect()
}
