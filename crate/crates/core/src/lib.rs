//! Receding-horizon control of bilinear quantum dynamics.
//!
//! The crate is organized bottom-up:
//!
//! - [`qcore`]: dense complex linear algebra and quantum-state primitives
//!   (vectorization, real embedding, partial trace, fidelity).
//! - [`dynamics`]: Liouvillian construction, first-order discretization to a
//!   bilinear control model, trajectory linearization, and an
//!   exact-exponential ground-truth plant.
//! - [`qpsolver`]: an ADMM solver for convex QPs in the standard form
//!   `min ½ zᵀPz + qᵀz  s.t.  l ≤ Gz ≤ u`, backed by a sparse LDLᵀ
//!   factorization of the KKT system.
//! - [`mpc`]: the linear-quadratic MPC step, SQP for the bilinear dynamics,
//!   warm-start shifting, and the closed-loop driver.
//! - [`baselines`]: analytic area-π and DRAG pulses plus Nelder-Mead
//!   calibration for model-free comparisons.

pub mod baselines;
pub mod dynamics;
pub mod mpc;
pub mod qcore;
pub mod qpsolver;
