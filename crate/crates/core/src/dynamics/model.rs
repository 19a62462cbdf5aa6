//! Discrete bilinear control models and their trajectory linearizations.

use nalgebra::{DMatrix, DVector};

use super::super::qcore::{RMat, RVec};
use super::liouvillian::Liouvillian;
use super::DynamicsError;

/// Discrete-time bilinear model `x(t+1) = (A + Σ_j u_j(t) N_j) x(t)`.
#[derive(Debug, Clone)]
pub struct BilinearModel {
    a: RMat,
    controls: Vec<RMat>,
    dt: f64,
}

impl BilinearModel {
    pub fn new(a: RMat, controls: Vec<RMat>, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::BadTimestep(dt));
        }
        let n = a.nrows();
        if !a.is_square() || controls.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(DynamicsError::DimensionMismatch(
                "drift and control matrices must be square with equal dimension".into(),
            ));
        }
        Ok(Self { a, controls, dt })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn drift(&self) -> &RMat {
        &self.a
    }

    pub fn control_generators(&self) -> &[RMat] {
        &self.controls
    }

    /// One step of the bilinear map.
    pub fn step(&self, x: &RVec, u: &RVec) -> RVec {
        let mut out = &self.a * x;
        for (uj, nj) in u.iter().zip(&self.controls) {
            out += nj * x * *uj;
        }
        out
    }

    /// Block-diagonal composition of two models with concatenated controls.
    /// Each control of `self` acts only on the first block and each control
    /// of `other` only on the second.
    pub fn direct_sum(&self, other: &BilinearModel) -> Result<BilinearModel, DynamicsError> {
        if (self.dt - other.dt).abs() > 1e-12 {
            return Err(DynamicsError::BadTimestep(other.dt));
        }
        let (n1, n2) = (self.state_dim(), other.state_dim());
        let n = n1 + n2;
        let embed_first = |m: &RMat| {
            let mut out = DMatrix::zeros(n, n);
            out.view_mut((0, 0), (n1, n1)).copy_from(m);
            out
        };
        let embed_second = |m: &RMat| {
            let mut out = DMatrix::zeros(n, n);
            out.view_mut((n1, n1), (n2, n2)).copy_from(m);
            out
        };
        let mut a = embed_first(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let controls = self
            .controls
            .iter()
            .map(embed_first)
            .chain(other.controls.iter().map(embed_second))
            .collect();
        BilinearModel::new(a, controls, self.dt)
    }

    /// First-order (Euler) discretization of a Liouvillian:
    /// `A = I + dt L_drift`, `N_j = dt L_j`, with the control held constant
    /// across each step.
    pub fn discretize_first_order(l: &Liouvillian, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::BadTimestep(dt));
        }
        let n = l.state_dim();
        let a = RMat::identity(n, n) + l.drift_generator() * dt;
        let controls = l.control_generators().iter().map(|m| m * dt).collect();
        BilinearModel::new(a, controls, dt)
    }
}

/// Bilinear model for the vectorized-process state `P = |U>><<U|` of a
/// closed system, discretized at `dt`. See [`Liouvillian::lift_to_process`].
pub fn lift_to_process_model(l: &Liouvillian, dt: f64) -> Result<BilinearModel, DynamicsError> {
    BilinearModel::discretize_first_order(&l.lift_to_process()?, dt)
}

/// Time-varying affine dynamics `x(t+1) = A(t) x(t) + B(t) u(t) + c(t)` over
/// a horizon, produced by linearizing a bilinear model about a guess
/// trajectory (or supplied directly for genuinely linear systems).
#[derive(Debug, Clone)]
pub struct LinearizedDynamics {
    pub a_t: Vec<RMat>,
    pub b_t: Vec<RMat>,
    /// Affine offsets `c(t) = f(x_g(t), u_g(t)) - A(t) x_g(t) - B(t) u_g(t)`.
    pub c_t: Vec<RVec>,
    /// Defect `r(t+1) = f(x_g(t), u_g(t)) - x_g(t+1)` of the guess.
    pub residuals: Vec<RVec>,
}

impl LinearizedDynamics {
    pub fn horizon(&self) -> usize {
        self.a_t.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a_t.first().map_or(0, |m| m.nrows())
    }

    pub fn control_dim(&self) -> usize {
        self.b_t.first().map_or(0, |m| m.ncols())
    }

    /// Constant linear dynamics over a horizon (zero residuals).
    pub fn time_invariant(a: RMat, b: RMat, horizon: usize) -> Self {
        let n = a.nrows();
        Self {
            a_t: vec![a; horizon],
            b_t: vec![b; horizon],
            c_t: vec![DVector::zeros(n); horizon],
            residuals: vec![DVector::zeros(n); horizon],
        }
    }
}

/// Linearize a bilinear model about guess trajectories:
/// `A(t) = A + Σ_j u_j^g(t) N_j`, `B(t) column j = N_j x^g(t)`.
pub fn linearize(
    model: &BilinearModel,
    x_guess: &[RVec],
    u_guess: &[RVec],
) -> Result<LinearizedDynamics, DynamicsError> {
    let horizon = u_guess.len();
    if x_guess.len() != horizon + 1 {
        return Err(DynamicsError::DimensionMismatch(format!(
            "guess has {} states for {} controls; expected {}",
            x_guess.len(),
            horizon,
            horizon + 1
        )));
    }
    let n = model.state_dim();
    let m = model.num_controls();
    let mut a_t = Vec::with_capacity(horizon);
    let mut b_t = Vec::with_capacity(horizon);
    let mut c_t = Vec::with_capacity(horizon);
    let mut residuals = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let xg = &x_guess[t];
        let ug = &u_guess[t];
        if xg.len() != n || ug.len() != m {
            return Err(DynamicsError::DimensionMismatch(
                "guess entry dimension mismatch".into(),
            ));
        }
        let mut a = model.a.clone();
        for (uj, nj) in ug.iter().zip(&model.controls) {
            a += nj * *uj;
        }
        let mut b = DMatrix::zeros(n, m);
        for (j, nj) in model.controls.iter().enumerate() {
            b.set_column(j, &(nj * xg));
        }
        let f = model.step(xg, ug);
        let c = &f - &a * xg - &b * ug;
        residuals.push(&f - &x_guess[t + 1]);
        a_t.push(a);
        b_t.push(b);
        c_t.push(c);
    }
    Ok(LinearizedDynamics {
        a_t,
        b_t,
        c_t,
        residuals,
    })
}
