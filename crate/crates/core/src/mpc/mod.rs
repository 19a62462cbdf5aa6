//! Receding-horizon model predictive control on bilinear state-space models.
//!
//! The finite-horizon problem is a QP over `z = (x(1..T), u(0..T-1))` with
//! quadratic stage costs, box bounds on the controls, slew-rate bounds, and
//! the (linearized) dynamics as equality constraints. Nonlinear problems are
//! handled by sequential quadratic programming: linearize about a guess
//! trajectory, solve the QP, line-search on a merit function, repeat.

mod closed_loop;
mod sqp;

pub use closed_loop::{run_closed_loop, ClosedLoopRecord, FeedbackAdapter};
pub use sqp::{build_qp, shift_warm_start, sqp_solve, GuessTrajectory, SqpResult};

use nalgebra::DMatrix;
use thiserror::Error;

use super::dynamics::DynamicsError;
use super::qcore::{population_indices, QcoreError, RMat};
use super::qpsolver::{QpError, SolveOptions};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("guess trajectory has inconsistent lengths")]
    BadGuess,
    #[error("QP reported infeasible even after relaxing slew bounds")]
    Infeasible,
}

/// Tuning for the SQP outer loop.
#[derive(Debug, Clone)]
pub struct SqpConfig {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the step.
    pub tol: f64,
    /// Weight on the squared dynamics defect in the merit function.
    pub merit_weight: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Backtracking shrink factor.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// When false, take the full step without a line search (used for the
    /// single-iteration re-solves inside the closed loop).
    pub line_search: bool,
}

impl Default for SqpConfig {
    fn default() -> Self {
        Self {
            max_iters: 30,
            tol: 1e-6,
            merit_weight: 1e3,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 20,
            line_search: true,
        }
    }
}

/// How the closed loop re-plans at measurements after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanMode {
    /// One line-searched SQP iteration from the shifted previous plan.
    /// Cheap, and deliberately inertial: it avoids over-reacting to state
    /// components the model cannot actuate.
    Refine,
    /// Full SQP to convergence at every measurement.
    FullSqp,
}

/// Horizon, weights, and constraint bounds for one MPC instance.
#[derive(Debug, Clone)]
pub struct MpcConfig {
    /// Horizon length in steps.
    pub horizon: usize,
    /// Running state weight.
    pub q: RMat,
    /// Control weight.
    pub r: RMat,
    /// Terminal state weight.
    pub qf: RMat,
    /// Symmetric per-control amplitude bound; infinite entries are skipped.
    pub u_max: Vec<f64>,
    /// Per-control slew bound on consecutive controls; `None` disables.
    pub du_max: Option<Vec<f64>>,
    /// Apply slew bounds between interior horizon steps, not only against
    /// the previously applied control.
    pub interior_slew: bool,
    /// Steps between state measurements / re-plans in the closed loop.
    pub feedback_period: usize,
    /// Re-plan policy at measurements after the first.
    pub replan: ReplanMode,
    pub sqp: SqpConfig,
    pub solver: SolveOptions,
}

impl MpcConfig {
    pub fn validate(&self, state_dim: usize, control_dim: usize) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::BadConfig("horizon must be positive".into()));
        }
        for (name, m) in [("Q", &self.q), ("R", &self.r), ("Qf", &self.qf)] {
            let want = if name == "R" { control_dim } else { state_dim };
            if m.nrows() != want || m.ncols() != want {
                return Err(MpcError::BadConfig(format!("{name} must be {want}x{want}")));
            }
        }
        if self.u_max.len() != control_dim {
            return Err(MpcError::BadConfig("u_max length mismatch".into()));
        }
        if let Some(du) = &self.du_max {
            if du.len() != control_dim {
                return Err(MpcError::BadConfig("du_max length mismatch".into()));
            }
        }
        if self.feedback_period == 0 || self.feedback_period > self.horizon {
            return Err(MpcError::BadConfig(
                "feedback period must lie in 1..=horizon".into(),
            ));
        }
        Ok(())
    }
}

/// Diagonal state weight that penalizes only the population components
/// (real parts of the density-matrix diagonal) of an `n`-level system.
pub fn population_weight(n_levels: usize, weight: f64) -> RMat {
    let dim = 2 * n_levels * n_levels;
    let mut m = DMatrix::zeros(dim, dim);
    for k in population_indices(n_levels) {
        m[(k, k)] = weight;
    }
    m
}
