//! Finite-horizon QP construction and the SQP outer loop.
//!
//! Decision vector layout: `z = (x(1), .., x(T), u(0), .., u(T-1))`. The
//! initial state `x(0)` is data, folded into the right-hand side of the
//! first dynamics row.

use nalgebra::DVector;

use super::super::dynamics::{linearize, BilinearModel, LinearizedDynamics};
use super::super::qcore::RVec;
use super::super::qpsolver::{self, CscMatrix, QPProblem, SolveStatus};
use super::{MpcConfig, MpcError};
#[cfg(test)]
use super::ReplanMode;

/// A guess (or plan): `x` has `T + 1` states, `u` has `T` controls.
#[derive(Debug, Clone)]
pub struct GuessTrajectory {
    pub x: Vec<RVec>,
    pub u: Vec<RVec>,
}

impl GuessTrajectory {
    /// Roll the model forward with zero control.
    pub fn zero_control(model: &BilinearModel, x0: RVec, horizon: usize) -> Self {
        let u = vec![DVector::zeros(model.num_controls()); horizon];
        Self::from_controls(model, x0, u)
    }

    /// Cold-start guess holding the initial state constant with a small
    /// nonzero control. A pure-population cost is exactly stationary at
    /// `u = 0` when the initial state is a drift eigenstate (controls move
    /// populations only at second order), so an all-zero guess would make
    /// the first QP return the zero pulse; the `epsilon` bias breaks that
    /// degeneracy while staying far inside any realistic control bounds.
    pub fn cold_start(model: &BilinearModel, x0: RVec, horizon: usize, epsilon: f64) -> Self {
        let x = vec![x0; horizon + 1];
        let u = vec![DVector::from_element(model.num_controls(), epsilon); horizon];
        Self { x, u }
    }

    /// Roll the model forward under the given control sequence.
    pub fn from_controls(model: &BilinearModel, x0: RVec, u: Vec<RVec>) -> Self {
        let mut x = Vec::with_capacity(u.len() + 1);
        x.push(x0);
        for ut in &u {
            let next = model.step(x.last().unwrap(), ut);
            x.push(next);
        }
        Self { x, u }
    }

    pub fn horizon(&self) -> usize {
        self.u.len()
    }

    fn check(&self, n: usize, m: usize) -> Result<(), MpcError> {
        let ok = self.x.len() == self.u.len() + 1
            && self.x.iter().all(|v| v.len() == n)
            && self.u.iter().all(|v| v.len() == m);
        if ok {
            Ok(())
        } else {
            Err(MpcError::BadGuess)
        }
    }
}

/// Quadratic trajectory cost
/// `Σ_{t=1}^{T-1} (x(t)-x_ref)ᵀQ(x(t)-x_ref) + (x(T)-x_ref)ᵀQf(..) + Σ_t u(t)ᵀRu(t)`.
pub fn stage_cost(cfg: &MpcConfig, x: &[RVec], u: &[RVec], x_ref: &RVec) -> f64 {
    let horizon = u.len();
    let mut total = 0.0;
    for (t, xt) in x.iter().enumerate().skip(1) {
        let w = if t == horizon { &cfg.qf } else { &cfg.q };
        let d = xt - x_ref;
        total += d.dot(&(w * &d));
    }
    for ut in u {
        total += ut.dot(&(&cfg.r * ut));
    }
    total
}

/// Assemble the horizon QP about a linearization. `include_slew = false`
/// drops the slew-rate rows (used as an infeasibility fallback).
pub fn build_qp(
    lin: &LinearizedDynamics,
    cfg: &MpcConfig,
    x0: &RVec,
    x_ref: &RVec,
    u_prev: Option<&RVec>,
    include_slew: bool,
) -> Result<QPProblem, MpcError> {
    let horizon = cfg.horizon;
    let n = lin.state_dim();
    let m = lin.control_dim();
    cfg.validate(n, m)?;
    if lin.horizon() != horizon || x0.len() != n || x_ref.len() != n {
        return Err(MpcError::BadConfig(
            "linearization horizon or state dimensions disagree".into(),
        ));
    }
    let n_z = horizon * (n + m);
    let x_col = |t: usize, i: usize| (t - 1) * n + i; // t in 1..=T
    let u_col = |t: usize, j: usize| horizon * n + t * m + j;

    // Cost: P = 2 blkdiag(Q, .., Q, Qf, R, .., R), q = -2 W x_ref per state.
    let mut p_triplets = Vec::new();
    let mut q_vec = DVector::zeros(n_z);
    for t in 1..=horizon {
        let w = if t == horizon { &cfg.qf } else { &cfg.q };
        for i in 0..n {
            for j in 0..n {
                let v = w[(i, j)];
                if v != 0.0 {
                    p_triplets.push((x_col(t, i), x_col(t, j), 2.0 * v));
                }
            }
        }
        let wq = w * x_ref;
        for i in 0..n {
            q_vec[x_col(t, i)] = -2.0 * wq[i];
        }
    }
    for t in 0..horizon {
        for i in 0..m {
            for j in 0..m {
                let v = cfg.r[(i, j)];
                if v != 0.0 {
                    p_triplets.push((u_col(t, i), u_col(t, j), 2.0 * v));
                }
            }
        }
    }

    // Constraints.
    let mut g_triplets = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut row = 0usize;

    // Dynamics: x(t+1) - A(t) x(t) - B(t) u(t) = c(t)  (+ A(0)x0 at t = 0).
    for t in 0..horizon {
        let rhs_extra = if t == 0 {
            Some(&lin.a_t[0] * x0)
        } else {
            None
        };
        for i in 0..n {
            g_triplets.push((row + i, x_col(t + 1, i), 1.0));
            if t >= 1 {
                for k in 0..n {
                    let v = lin.a_t[t][(i, k)];
                    if v != 0.0 {
                        g_triplets.push((row + i, x_col(t, k), -v));
                    }
                }
            }
            for j in 0..m {
                let v = lin.b_t[t][(i, j)];
                if v != 0.0 {
                    g_triplets.push((row + i, u_col(t, j), -v));
                }
            }
            let rhs = lin.c_t[t][i] + rhs_extra.as_ref().map_or(0.0, |e| e[i]);
            lower.push(rhs);
            upper.push(rhs);
        }
        row += n;
    }

    // Control amplitude boxes.
    for t in 0..horizon {
        for j in 0..m {
            if cfg.u_max[j].is_finite() {
                g_triplets.push((row, u_col(t, j), 1.0));
                lower.push(-cfg.u_max[j]);
                upper.push(cfg.u_max[j]);
                row += 1;
            }
        }
    }

    // Slew rates: u(0) - u_prev and, optionally, u(t) - u(t-1).
    if include_slew {
        if let Some(du) = &cfg.du_max {
            for j in 0..m {
                if !du[j].is_finite() {
                    continue;
                }
                if let Some(up) = u_prev {
                    g_triplets.push((row, u_col(0, j), 1.0));
                    lower.push(up[j] - du[j]);
                    upper.push(up[j] + du[j]);
                    row += 1;
                }
                if cfg.interior_slew {
                    for t in 1..horizon {
                        g_triplets.push((row, u_col(t, j), 1.0));
                        g_triplets.push((row, u_col(t - 1, j), -1.0));
                        lower.push(-du[j]);
                        upper.push(du[j]);
                        row += 1;
                    }
                }
            }
        }
    }

    Ok(QPProblem {
        p: CscMatrix::from_triplets(n_z, n_z, p_triplets),
        q: q_vec,
        g: CscMatrix::from_triplets(row, n_z, g_triplets),
        l: DVector::from_vec(lower),
        u: DVector::from_vec(upper),
    })
}

fn unpack(z: &RVec, x0: &RVec, horizon: usize, n: usize, m: usize) -> (Vec<RVec>, Vec<RVec>) {
    let mut x = Vec::with_capacity(horizon + 1);
    x.push(x0.clone());
    for t in 0..horizon {
        x.push(z.rows(t * n, n).clone_owned());
    }
    let u = (0..horizon)
        .map(|t| z.rows(horizon * n + t * m, m).clone_owned())
        .collect();
    (x, u)
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub trajectory: GuessTrajectory,
    pub iterations: usize,
    pub converged: bool,
    /// True when slew bounds had to be dropped to restore feasibility.
    pub slew_relaxed: bool,
}

fn merit(cfg: &MpcConfig, model: &BilinearModel, g: &GuessTrajectory, x_ref: &RVec) -> f64 {
    let mut defect = 0.0;
    for t in 0..g.horizon() {
        defect += (model.step(&g.x[t], &g.u[t]) - &g.x[t + 1]).norm_squared();
    }
    stage_cost(cfg, &g.x, &g.u, x_ref) + cfg.sqp.merit_weight * defect
}

/// Sequential quadratic programming over the horizon: linearize about the
/// guess, solve the QP, line-search on the exact-penalty merit, repeat until
/// the step stalls or `max_iters` is reached.
pub fn sqp_solve(
    model: &BilinearModel,
    cfg: &MpcConfig,
    x0: &RVec,
    x_ref: &RVec,
    u_prev: Option<&RVec>,
    mut guess: GuessTrajectory,
) -> Result<SqpResult, MpcError> {
    let n = model.state_dim();
    let m = model.num_controls();
    cfg.validate(n, m)?;
    guess.check(n, m)?;
    if guess.horizon() != cfg.horizon {
        return Err(MpcError::BadGuess);
    }
    guess.x[0] = x0.clone();

    let mut warm: Option<(RVec, RVec)> = None;
    let mut slew_relaxed = false;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.sqp.max_iters {
        iterations = iter;
        let lin = linearize(model, &guess.x, &guess.u)?;
        let defect_sq: f64 = lin.residuals.iter().map(|r| r.norm_squared()).sum();

        let qp = build_qp(&lin, cfg, x0, x_ref, u_prev, true)?;
        let mut opts = cfg.solver.clone();
        opts.warm_start = warm.take();
        let mut sol = qpsolver::solve(&qp, &opts)?;
        if sol.status == SolveStatus::Infeasible {
            let relaxed = build_qp(&lin, cfg, x0, x_ref, u_prev, false)?;
            sol = qpsolver::solve(&relaxed, &cfg.solver)?;
            slew_relaxed = true;
            if sol.status == SolveStatus::Infeasible {
                return Err(MpcError::Infeasible);
            }
        } else {
            warm = Some((sol.z.clone(), sol.y.clone()));
        }

        let (x_new, u_new) = unpack(&sol.z, x0, cfg.horizon, n, m);
        let step_inf = x_new
            .iter()
            .zip(&guess.x)
            .map(|(a, b)| (a - b).amax())
            .chain(u_new.iter().zip(&guess.u).map(|(a, b)| (a - b).amax()))
            .fold(0.0f64, f64::max);

        if !cfg.sqp.line_search {
            guess = GuessTrajectory { x: x_new, u: u_new };
            if step_inf <= cfg.sqp.tol {
                converged = true;
                break;
            }
            continue;
        }

        if step_inf <= cfg.sqp.tol {
            converged = true;
            break;
        }

        // Backtracking line search on the merit. The linearized defect at
        // step fraction α scales as (1-α)², which gives the prediction.
        let phi0 = merit(cfg, model, &guess, x_ref);
        let blend = |alpha: f64| {
            let x = guess
                .x
                .iter()
                .zip(&x_new)
                .map(|(g, f)| g + (f - g) * alpha)
                .collect::<Vec<_>>();
            let u = guess
                .u
                .iter()
                .zip(&u_new)
                .map(|(g, f)| g + (f - g) * alpha)
                .collect::<Vec<_>>();
            GuessTrajectory { x, u }
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.sqp.max_backtracks {
            let cand = blend(alpha);
            let phi = merit(cfg, model, &cand, x_ref);
            let predicted = stage_cost(cfg, &cand.x, &cand.u, x_ref)
                + cfg.sqp.merit_weight * (1.0 - alpha).powi(2) * defect_sq;
            let target = phi0 - cfg.sqp.armijo_c1 * alpha * (phi0 - predicted).max(0.0);
            if phi <= target && phi < phi0 {
                accepted = Some(cand);
                break;
            }
            alpha *= cfg.sqp.backtrack;
        }
        match accepted {
            Some(cand) => guess = cand,
            None => {
                // No merit decrease in any step fraction: treat as converged
                // to the achievable accuracy.
                converged = true;
                break;
            }
        }
    }

    Ok(SqpResult {
        trajectory: guess,
        iterations,
        converged,
        slew_relaxed,
    })
}

/// Advance a plan by `shift` steps for re-use as the next warm start: drop
/// the applied prefix and extend by holding the last control.
pub fn shift_warm_start(
    plan: &GuessTrajectory,
    model: &BilinearModel,
    shift: usize,
) -> GuessTrajectory {
    let horizon = plan.horizon();
    let shift = shift.min(horizon);
    let last_u = plan.u.last().cloned().unwrap_or_else(|| DVector::zeros(0));
    let mut u: Vec<RVec> = plan.u[shift..].to_vec();
    let mut x: Vec<RVec> = plan.x[shift..].to_vec();
    while u.len() < horizon {
        let next = model.step(x.last().unwrap(), &last_u);
        u.push(last_u.clone());
        x.push(next);
    }
    GuessTrajectory { x, u }
}
