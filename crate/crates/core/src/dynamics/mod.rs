//! Continuous-time generators, discrete bilinear models, linearization, and
//! the exact-exponential ground-truth plant.

mod expm;
mod liouvillian;
mod model;

pub use expm::expm;
pub use liouvillian::{build_liouvillian, step_truth, Dissipator, Liouvillian};
pub use model::{lift_to_process_model, linearize, BilinearModel, LinearizedDynamics};

use super::qcore::QcoreError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Hamiltonian is not Hermitian within tolerance (max deviation {0})")]
    NonHermitianHamiltonian(f64),
    #[error("dissipator coefficient matrix is not PSD (min eigenvalue {0})")]
    NonPsdDissipator(f64),
    #[error("operation requires a closed system (no dissipator)")]
    DissipativeSystem,
    #[error("invalid timestep {0}")]
    BadTimestep(f64),
}
