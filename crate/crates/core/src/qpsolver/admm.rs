//! Operator-splitting (ADMM) solver for convex QPs in the standard form
//! `min ½ zᵀPz + qᵀz  s.t.  l ≤ Gz ≤ u` with equalities encoded as `l = u`.

use nalgebra::DVector;

use super::super::qcore::RVec;
use super::ldlt::LdltFactor;
use super::sparse::CscMatrix;
use super::QpError;

/// QP data. `p` holds the full symmetric Hessian; `g` stacks all
/// constraint rows (equalities are rows with `l = u`).
#[derive(Debug, Clone)]
pub struct QPProblem {
    pub p: CscMatrix,
    pub q: RVec,
    pub g: CscMatrix,
    pub l: RVec,
    pub u: RVec,
}

impl QPProblem {
    pub fn num_vars(&self) -> usize {
        self.p.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.g.nrows()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        let m = self.num_constraints();
        if self.p.nrows() != n || self.q.len() != n {
            return Err(QpError::BadProblem("P and q dimensions disagree".into()));
        }
        if self.g.ncols() != n || self.l.len() != m || self.u.len() != m {
            return Err(QpError::BadProblem("G, l, u dimensions disagree".into()));
        }
        if self.p.max_abs_diff(&self.p.transpose()) > 1e-12 {
            return Err(QpError::BadProblem("P is not symmetric".into()));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(QpError::BadProblem("q contains non-finite entries".into()));
        }
        for i in 0..m {
            if self.l[i] > self.u[i] {
                return Err(QpError::BadProblem(format!(
                    "constraint {i} has l > u ({} > {})",
                    self.l[i], self.u[i]
                )));
            }
        }
        Ok(())
    }

    pub fn objective(&self, z: &RVec) -> f64 {
        0.5 * z.dot(&self.p.mul_vec(z)) + self.q.dot(z)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho: f64,
    /// Multiplier applied to `rho` on equality rows.
    pub rho_eq_scale: f64,
    pub sigma: f64,
    /// Primal/dual warm start `(z, y)`.
    pub warm_start: Option<(RVec, RVec)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 4000,
            rho: 0.1,
            rho_eq_scale: 1e3,
            sigma: 1e-6,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QPSolution {
    pub z: RVec,
    pub y: RVec,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

const CHECK_INTERVAL: usize = 25;
const EPS_INFEASIBLE: f64 = 1e-8;
const RHO_ADAPT_THRESHOLD: f64 = 5.0;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const POLISH_DELTA: f64 = 1e-9;

fn build_kkt(qp: &QPProblem, sigma: f64, rho: &DVector<f64>) -> CscMatrix {
    let n = qp.num_vars();
    let m = qp.num_constraints();
    // Upper triangle of [[P + σI, Gᵀ], [G, -diag(1/ρ)]].
    let mut triplets: Vec<(usize, usize, f64)> =
        Vec::with_capacity(qp.p.nnz() + qp.g.nnz() + n + m);
    for (r, c, v) in qp.p.triplets() {
        if r <= c {
            triplets.push((r, c, v));
        }
    }
    for i in 0..n {
        triplets.push((i, i, sigma));
    }
    for (r, c, v) in qp.g.triplets() {
        // Constraint row r becomes KKT row/col n + r; variable c stays.
        triplets.push((c, n + r, v));
    }
    for i in 0..m {
        triplets.push((n + i, n + i, -1.0 / rho[i]));
    }
    CscMatrix::from_triplets(n + m, n + m, triplets)
}

/// Solve the QP by ADMM. The KKT system is factored by sparse LDLᵀ and
/// re-factored only when the step size `ρ` is adapted. Deterministic:
/// identical inputs give identical outputs.
pub fn solve(qp: &QPProblem, opts: &SolveOptions) -> Result<QPSolution, QpError> {
    qp.validate()?;
    let n = qp.num_vars();
    let m = qp.num_constraints();

    let mut rho_base = opts.rho;
    let rho_of = |base: f64| {
        DVector::from_fn(m, |i, _| {
            if qp.l[i] == qp.u[i] {
                (base * opts.rho_eq_scale).clamp(RHO_MIN, RHO_MAX * opts.rho_eq_scale)
            } else {
                base.clamp(RHO_MIN, RHO_MAX)
            }
        })
    };
    let mut rho = rho_of(rho_base);
    let mut factor = LdltFactor::new(&build_kkt(qp, opts.sigma, &rho))?;

    let (mut z, mut y) = match &opts.warm_start {
        Some((z0, y0)) => {
            if z0.len() != n || y0.len() != m {
                return Err(QpError::BadProblem("warm start dimension mismatch".into()));
            }
            (z0.clone(), y0.clone())
        }
        None => (DVector::zeros(n), DVector::zeros(m)),
    };
    let mut s = {
        let gz = qp.g.mul_vec(&z);
        DVector::from_fn(m, |i, _| gz[i].clamp(qp.l[i], qp.u[i]))
    };

    let mut rhs = vec![0.0f64; n + m];
    let mut y_prev_check = y.clone();
    let mut best: Option<(f64, RVec, RVec, f64, f64, usize)> = None;

    let mut iterations = opts.max_iter;
    let mut status = SolveStatus::MaxIter;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        // KKT solve for (z~, ν).
        for i in 0..n {
            rhs[i] = opts.sigma * z[i] - qp.q[i];
        }
        for i in 0..m {
            rhs[n + i] = s[i] - y[i] / rho[i];
        }
        factor.solve_in_place(&mut rhs);
        for i in 0..n {
            z[i] = rhs[i];
        }
        // s~ = s + (ν - y)/ρ, then project and update the dual.
        for i in 0..m {
            let s_tilde = s[i] + (rhs[n + i] - y[i]) / rho[i];
            let projected = (s_tilde + y[i] / rho[i]).clamp(qp.l[i], qp.u[i]);
            y[i] += rho[i] * (s_tilde - projected);
            s[i] = projected;
        }

        if iter % CHECK_INTERVAL == 0 || iter == opts.max_iter {
            let gz = qp.g.mul_vec(&z);
            let pz = qp.p.mul_vec(&z);
            let gty = qp.g.mul_vec_transpose(&y);
            let r_prim = (0..m)
                .map(|i| (gz[i] - s[i]).abs())
                .fold(0.0f64, f64::max);
            let r_dual = (0..n)
                .map(|i| (pz[i] + qp.q[i] + gty[i]).abs())
                .fold(0.0f64, f64::max);
            let eps_prim = opts.eps_abs
                + opts.eps_rel * gz.amax().max(s.amax());
            let eps_dual = opts.eps_abs
                + opts.eps_rel * pz.amax().max(gty.amax()).max(qp.q.amax());

            let score = r_prim.max(r_dual);
            if best.as_ref().map_or(true, |b| score < b.0) {
                best = Some((score, z.clone(), y.clone(), r_prim, r_dual, iter));
            }

            if r_prim <= eps_prim && r_dual <= eps_dual {
                status = SolveStatus::Solved;
                iterations = iter;
                primal_residual = r_prim;
                dual_residual = r_dual;
                break;
            }

            // Primal infeasibility certificate from the dual increment.
            let dy = &y - &y_prev_check;
            let dy_norm = dy.amax();
            if dy_norm > 0.0 {
                let dy_n = &dy / dy_norm;
                let gtdy = qp.g.mul_vec_transpose(&dy_n);
                let mut support = 0.0f64;
                let mut certifiable = true;
                for i in 0..m {
                    if dy_n[i] > EPS_INFEASIBLE {
                        if qp.u[i].is_infinite() {
                            certifiable = false;
                            break;
                        }
                        support += qp.u[i] * dy_n[i];
                    } else if dy_n[i] < -EPS_INFEASIBLE {
                        if qp.l[i].is_infinite() {
                            certifiable = false;
                            break;
                        }
                        support += qp.l[i] * dy_n[i];
                    }
                }
                if certifiable && gtdy.amax() <= EPS_INFEASIBLE && support < -EPS_INFEASIBLE {
                    return Ok(QPSolution {
                        z,
                        y,
                        status: SolveStatus::Infeasible,
                        iterations: iter,
                        primal_residual: r_prim,
                        dual_residual: r_dual,
                    });
                }
            }
            y_prev_check = y.clone();

            // Re-balance ρ when the residuals diverge in scale.
            let prim_scale = gz.amax().max(s.amax()).max(1e-12);
            let dual_scale = pz.amax().max(gty.amax()).max(qp.q.amax()).max(1e-12);
            let ratio = ((r_prim / prim_scale) / (r_dual / dual_scale).max(1e-30)).sqrt();
            if ratio.is_finite()
                && (ratio > RHO_ADAPT_THRESHOLD || ratio < 1.0 / RHO_ADAPT_THRESHOLD)
            {
                let new_base = (rho_base * ratio).clamp(RHO_MIN, RHO_MAX);
                if new_base != rho_base {
                    rho_base = new_base;
                    rho = rho_of(rho_base);
                    factor = LdltFactor::new(&build_kkt(qp, opts.sigma, &rho))?;
                }
            }
        }
    }

    if status == SolveStatus::MaxIter {
        // Return the best iterate observed.
        if let Some((_, bz, by, rp, rd, _)) = best {
            z = bz;
            y = by;
            primal_residual = rp;
            dual_residual = rd;
        }
    }

    if status == SolveStatus::Solved {
        if let Some((zp, yp, rp, rd)) = polish(qp, &y) {
            // A wrong active-set guess still zeroes stationarity and primal
            // residual by construction (the pinned rows absorb the
            // gradient), so complementarity has to take part in the
            // comparison to catch over-pinned inactive rows.
            let comp_old = complementarity(qp, &z, &y);
            let comp_new = complementarity(qp, &zp, &yp);
            if rp.max(rd).max(comp_new)
                <= primal_residual.max(dual_residual).max(comp_old)
            {
                z = zp;
                y = yp;
                primal_residual = rp;
                dual_residual = rd;
            }
        }
    }

    Ok(QPSolution {
        z,
        y,
        status,
        iterations,
        primal_residual,
        dual_residual,
    })
}

/// Re-solve the equality system of the active constraints to sharpen the
/// ADMM iterate. Returns the polished point and its residuals, or `None`
/// when the regularized active-set KKT cannot be factored.
fn polish(qp: &QPProblem, y: &RVec) -> Option<(RVec, RVec, f64, f64)> {
    let n = qp.num_vars();
    let m = qp.num_constraints();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        if qp.l[i] == qp.u[i] {
            active.push((i, qp.l[i]));
        } else if y[i] < 0.0 {
            active.push((i, qp.l[i]));
        } else if y[i] > 0.0 {
            active.push((i, qp.u[i]));
        }
    }
    let k = active.len();
    let row_of: std::collections::HashMap<usize, usize> =
        active.iter().enumerate().map(|(r, &(i, _))| (i, r)).collect();

    // Regularized KKT [[P + δI, G_aᵀ], [G_a, -δI]].
    let mut triplets = Vec::with_capacity(qp.p.nnz() + qp.g.nnz() + n + k);
    for (r, c, v) in qp.p.triplets() {
        if r <= c {
            triplets.push((r, c, v));
        }
    }
    for i in 0..n {
        triplets.push((i, i, POLISH_DELTA));
    }
    for (r, c, v) in qp.g.triplets() {
        if let Some(&ar) = row_of.get(&r) {
            triplets.push((c, n + ar, v));
        }
    }
    for i in 0..k {
        triplets.push((n + i, n + i, -POLISH_DELTA));
    }
    let kkt = CscMatrix::from_triplets(n + k, n + k, triplets);
    let factor = LdltFactor::new(&kkt).ok()?;

    let mut rhs = vec![0.0f64; n + k];
    for i in 0..n {
        rhs[i] = -qp.q[i];
    }
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[n + r] = b;
    }
    let mut sol = rhs.clone();
    factor.solve_in_place(&mut sol);

    // A couple of iterative-refinement passes against the unregularized
    // system to undo the δ perturbation.
    for _ in 0..2 {
        let zs = DVector::from_fn(n, |i, _| sol[i]);
        let ys_full = {
            let mut full = DVector::zeros(m);
            for (r, &(i, _)) in active.iter().enumerate() {
                full[i] = sol[n + r];
            }
            full
        };
        let pz = qp.p.mul_vec(&zs);
        let gty = qp.g.mul_vec_transpose(&ys_full);
        let gz = qp.g.mul_vec(&zs);
        let mut resid = vec![0.0f64; n + k];
        for i in 0..n {
            resid[i] = rhs[i] - (pz[i] + gty[i]);
        }
        for (r, &(i, _)) in active.iter().enumerate() {
            resid[n + r] = rhs[n + r] - gz[i];
        }
        factor.solve_in_place(&mut resid);
        for i in 0..n + k {
            sol[i] += resid[i];
        }
    }

    let z_pol = DVector::from_fn(n, |i, _| sol[i]);
    let mut y_pol = DVector::zeros(m);
    for (r, &(i, _)) in active.iter().enumerate() {
        y_pol[i] = sol[n + r];
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }

    // Residuals of the polished point (primal violation of all rows, not
    // only the active set).
    let gz = qp.g.mul_vec(&z_pol);
    let mut r_prim = 0.0f64;
    for i in 0..m {
        r_prim = r_prim.max(qp.l[i] - gz[i]).max(gz[i] - qp.u[i]);
    }
    r_prim = r_prim.max(0.0);
    let stat = qp.p.mul_vec(&z_pol) + &qp.q + qp.g.mul_vec_transpose(&y_pol);
    Some((z_pol, y_pol, r_prim, stat.amax()))
}

/// Max over inequality rows of `|y_i| · dist((Gz)_i, the bound y_i points
/// at)`; zero when the multiplier signs agree with the active constraints.
fn complementarity(qp: &QPProblem, z: &RVec, y: &RVec) -> f64 {
    let gz = qp.g.mul_vec(z);
    let mut comp = 0.0f64;
    for i in 0..qp.num_constraints() {
        if qp.l[i] < qp.u[i] {
            let dist = if y[i] > 0.0 {
                (qp.u[i] - gz[i]).abs()
            } else if y[i] < 0.0 {
                (gz[i] - qp.l[i]).abs()
            } else {
                0.0
            };
            comp = comp.max(y[i].abs() * dist.min(1.0));
        }
    }
    comp
}

/// KKT residual report for a candidate point (optionally with multipliers).
#[derive(Debug, Clone)]
pub struct KktReport {
    /// `‖Pz + q + Gᵀy‖∞` (gradient norm when no `y` is supplied).
    pub stationarity: f64,
    /// Max violation of `l ≤ Gz ≤ u`.
    pub primal_feasibility: f64,
    /// Max over rows of `|y_i| · dist((Gz)_i, nearest active bound)`;
    /// zero on equality rows.
    pub complementarity: f64,
}

pub fn kkt_check(qp: &QPProblem, z: &RVec, y: Option<&RVec>) -> Result<KktReport, QpError> {
    if z.len() != qp.num_vars() {
        return Err(QpError::BadProblem("z dimension mismatch".into()));
    }
    let m = qp.num_constraints();
    let gz = qp.g.mul_vec(z);
    let mut grad = qp.p.mul_vec(z) + &qp.q;
    if let Some(y) = y {
        if y.len() != m {
            return Err(QpError::BadProblem("y dimension mismatch".into()));
        }
        grad += qp.g.mul_vec_transpose(y);
    }
    let mut primal = 0.0f64;
    for i in 0..m {
        primal = primal.max((qp.l[i] - gz[i]).max(0.0));
        primal = primal.max((gz[i] - qp.u[i]).max(0.0));
    }
    Ok(KktReport {
        stationarity: grad.amax(),
        primal_feasibility: primal,
        complementarity: y.map_or(0.0, |y| complementarity(qp, z, y)),
    })
}
