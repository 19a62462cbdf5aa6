//! Analytic and model-free comparison controllers: area-π pulses, Gaussian
//! pulses with the DRAG derivative correction, and Nelder-Mead calibration
//! over pulse parameters. All pulses respect the same amplitude and slew
//! bounds handed to the MPC so comparisons stay fair.

use nalgebra::DVector;
use thiserror::Error;

use super::dynamics::BilinearModel;
use super::mpc::{sqp_solve, GuessTrajectory, MpcConfig, MpcError};
#[cfg(test)]
use super::mpc::ReplanMode;
use super::qcore::RVec;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("infeasible pulse: {constraint} binding ({detail})")]
    Infeasible {
        constraint: &'static str,
        detail: String,
    },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Mpc(#[from] MpcError),
}

/// A single-channel envelope that can be sampled on a uniform grid.
#[derive(Debug, Clone)]
pub enum PulseShape {
    /// Slew-limited trapezoid normalized to area π.
    ConstantAreaPi {
        duration: f64,
        u_max: f64,
        du_max: f64,
    },
    /// Truncated Gaussian with baseline subtraction so the envelope is
    /// exactly zero at both ends; `area` fixes the discrete integral.
    Gaussian {
        duration: f64,
        sigma: f64,
        area: f64,
    },
    /// Analytic time derivative of the Gaussian above, times `scale`.
    GaussianDerivative {
        duration: f64,
        sigma: f64,
        area: f64,
        scale: f64,
    },
}

impl PulseShape {
    /// Envelope values at the midpoints of `dt`-wide bins covering the
    /// pulse duration.
    pub fn sample(&self, dt: f64) -> Result<Vec<f64>, BaselineError> {
        match *self {
            PulseShape::ConstantAreaPi {
                duration,
                u_max,
                du_max,
            } => area_pi_pulse(duration, dt, u_max, du_max),
            PulseShape::Gaussian {
                duration,
                sigma,
                area,
            } => Ok(gaussian_samples(duration, dt, sigma, area)?.0),
            PulseShape::GaussianDerivative {
                duration,
                sigma,
                area,
                scale,
            } => {
                let (_, d) = gaussian_samples(duration, dt, sigma, area)?;
                Ok(d.into_iter().map(|v| scale * v).collect())
            }
        }
    }
}

fn check_grid(duration: f64, dt: f64) -> Result<usize, BaselineError> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(BaselineError::BadParameter(format!(
            "duration {duration} and dt {dt} must be positive"
        )));
    }
    let steps = (duration / dt).round() as usize;
    if steps == 0 || (steps as f64 * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(BaselineError::BadParameter(format!(
            "duration {duration} is not a whole number of {dt} steps"
        )));
    }
    Ok(steps)
}

/// Trapezoid with slew-limited ramps whose discrete area `Σ u(t)·dt` equals
/// π to 1e-9. Errors name the binding constraint when the bounds make an
/// area-π pulse impossible.
pub fn area_pi_pulse(
    duration: f64,
    dt: f64,
    u_max: f64,
    du_max: f64,
) -> Result<Vec<f64>, BaselineError> {
    let steps = check_grid(duration, dt)?;
    if !(u_max > 0.0) || !(du_max > 0.0) {
        return Err(BaselineError::BadParameter(format!(
            "u_max {u_max} and du_max {du_max} must be positive"
        )));
    }
    // Sample k ramps up from zero at the slew limit, holds the plateau `a`,
    // and ramps back down so the next control after the pulse can be zero.
    let profile = |a: f64| -> Vec<f64> {
        (0..steps)
            .map(|k| {
                let up = (k + 1) as f64 * du_max;
                let down = (steps - k) as f64 * du_max;
                a.min(up).min(down)
            })
            .collect()
    };
    let area = |a: f64| -> f64 { profile(a).iter().sum::<f64>() * dt };
    let pi = std::f64::consts::PI;
    if area(u_max) < pi - 1e-12 {
        // Decide which bound is responsible: lifting the slew limit leaves a
        // plain rectangle at u_max.
        let rect = u_max * duration;
        return Err(if rect >= pi {
            BaselineError::Infeasible {
                constraint: "du_max",
                detail: format!(
                    "slew-limited area {:.6} < π over {duration} ns",
                    area(u_max)
                ),
            }
        } else {
            BaselineError::Infeasible {
                constraint: "u_max",
                detail: format!("u_max·duration = {rect:.6} < π"),
            }
        });
    }
    // area(a) is continuous, piecewise linear, and strictly increasing up to
    // the saturation amplitude, so bisection pins the plateau exactly.
    let (mut lo, mut hi) = (0.0_f64, u_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if area(mid) < pi {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    let mut u = profile(a);
    // Absorb the last float-level residue into the plateau samples.
    let residue = pi - u.iter().sum::<f64>() * dt;
    let plateau: Vec<usize> = (0..steps).filter(|&k| u[k] >= a - 1e-12).collect();
    if !plateau.is_empty() {
        let bump = residue / (plateau.len() as f64 * dt);
        for k in plateau {
            u[k] += bump;
        }
    }
    Ok(u)
}

fn gaussian_samples(
    duration: f64,
    dt: f64,
    sigma: f64,
    area: f64,
) -> Result<(Vec<f64>, Vec<f64>), BaselineError> {
    let steps = check_grid(duration, dt)?;
    if !(sigma > 0.0) {
        return Err(BaselineError::BadParameter(format!(
            "sigma {sigma} must be positive"
        )));
    }
    let center = duration / 2.0;
    let g = |t: f64| (-((t - center) * (t - center)) / (2.0 * sigma * sigma)).exp();
    let baseline = g(0.0);
    let mid = |k: usize| (k as f64 + 0.5) * dt;
    let raw: Vec<f64> = (0..steps).map(|k| g(mid(k)) - baseline).collect();
    let raw_area: f64 = raw.iter().sum::<f64>() * dt;
    if raw_area <= 0.0 {
        return Err(BaselineError::BadParameter(
            "Gaussian envelope has no area after baseline subtraction".into(),
        ));
    }
    let amp = area / raw_area;
    let envelope: Vec<f64> = raw.iter().map(|v| amp * v).collect();
    // Analytic derivative of the scaled envelope; the subtracted baseline is
    // constant and drops out.
    let derivative: Vec<f64> = (0..steps)
        .map(|k| {
            let t = mid(k);
            amp * (-(t - center) / (sigma * sigma)) * g(t)
        })
        .collect();
    Ok((envelope, derivative))
}

/// Gaussian π-pulse on the x quadrature plus the DRAG correction
/// `u_y = scale·u̇_x/|alpha|` on the y quadrature, both sampled at bin
/// midpoints. `sigma` defaults to `duration / 6` when `None`.
pub fn drag_pulses(
    duration: f64,
    dt: f64,
    alpha: f64,
    scale: f64,
    sigma: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>), BaselineError> {
    if alpha == 0.0 {
        return Err(BaselineError::BadParameter(
            "DRAG correction needs a nonzero anharmonicity".into(),
        ));
    }
    if !(0.0..=1.0).contains(&scale) {
        return Err(BaselineError::BadParameter(format!(
            "DRAG scale {scale} outside [0, 1]"
        )));
    }
    let sigma = sigma.unwrap_or(duration / 6.0);
    let (ux, dux) = gaussian_samples(duration, dt, sigma, std::f64::consts::PI)?;
    let uy = dux.into_iter().map(|v| scale * v / alpha.abs()).collect();
    Ok((ux, uy))
}

/// Every objective evaluation made during a Nelder-Mead run, in order.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<f64>,
}

const NM_REFLECT: f64 = 1.0;
const NM_EXPAND: f64 = 2.0;
const NM_CONTRACT: f64 = 0.5;
const NM_SHRINK: f64 = 0.5;
const NM_FTOL: f64 = 1e-12;

/// Derivative-free simplex search with the standard coefficients
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5). The history
/// records every objective call so calibration cost can be plotted per
/// evaluation rather than per iteration.
pub fn nelder_mead_calibrate<F>(
    mut objective: F,
    initial_simplex: &[Vec<f64>],
    max_iters: usize,
) -> Result<NelderMeadResult, BaselineError>
where
    F: FnMut(&[f64]) -> f64,
{
    if initial_simplex.is_empty() {
        return Err(BaselineError::BadParameter("empty simplex".into()));
    }
    let dim = initial_simplex[0].len();
    if initial_simplex.len() != dim + 1 || initial_simplex.iter().any(|v| v.len() != dim) {
        return Err(BaselineError::BadParameter(format!(
            "simplex over {dim} parameters needs {} vertices of that length",
            dim + 1
        )));
    }
    let mut history = Vec::new();
    let mut eval = |p: &[f64], history: &mut Vec<f64>| -> Result<f64, BaselineError> {
        let v = objective(p);
        if !v.is_finite() {
            return Err(BaselineError::BadParameter(format!(
                "objective returned {v} at {p:?}"
            )));
        }
        history.push(v);
        Ok(v)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    for vertex in initial_simplex {
        let f = eval(vertex, &mut history)?;
        simplex.push((vertex.clone(), f));
    }
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[dim].1 - simplex[0].1 <= NM_FTOL * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(v, _)| v[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let at = |coef: f64| -> Vec<f64> {
            (0..dim)
                .map(|i| centroid[i] + coef * (centroid[i] - worst.0[i]))
                .collect()
        };
        let reflected = at(NM_REFLECT);
        let f_r = eval(&reflected, &mut history)?;
        if f_r < simplex[0].1 {
            let expanded = at(NM_EXPAND);
            let f_e = eval(&expanded, &mut history)?;
            simplex[dim] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_r);
        } else {
            // Contract toward the better of the worst vertex and its
            // reflection.
            let (outside, f_ref) = if f_r < worst.1 {
                (true, f_r)
            } else {
                (false, worst.1)
            };
            let contracted = at(if outside { NM_CONTRACT } else { -NM_CONTRACT });
            let f_c = eval(&contracted, &mut history)?;
            if f_c <= f_ref {
                simplex[dim] = (contracted, f_c);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for i in 0..dim {
                        vertex.0[i] = best[i] + NM_SHRINK * (vertex.0[i] - best[i]);
                    }
                    vertex.1 = eval(&vertex.0.clone(), &mut history)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(NelderMeadResult {
        best: simplex[0].0.clone(),
        best_value: simplex[0].1,
        history,
    })
}

/// Open-loop optimal control: one horizon-length SQP solve with no feedback.
/// Used directly as a baseline and as the model-aware seed for calibration
/// simplexes.
pub fn open_loop_optimal_pulse(
    model: &BilinearModel,
    x0: &RVec,
    x_ref: &RVec,
    cfg: &MpcConfig,
) -> Result<Vec<RVec>, BaselineError> {
    if cfg.horizon == 0 {
        return Ok(Vec::new());
    }
    let epsilon = cfg
        .u_max
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min)
        .min(0.1)
        / 10.0;
    let guess = GuessTrajectory::cold_start(model, x0.clone(), cfg.horizon, epsilon);
    let res = sqp_solve(model, cfg, x0, x_ref, None, guess)?;
    Ok(res.trajectory.u)
}

/// Build the Appendix-style random-seed simplex: one seed pulse plus one
/// vertex per coordinate with that coordinate bumped by `du`.
pub fn seed_simplex(seed: &[f64], du: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![seed.to_vec()];
    for i in 0..seed.len() {
        let mut v = seed.to_vec();
        v[i] += du;
        simplex.push(v);
    }
    simplex
}

/// Convenience: flat control vectors for a single-channel pulse.
pub fn to_controls(samples: &[f64]) -> Vec<RVec> {
    samples.iter().map(|&v| DVector::from_element(1, v)).collect()
}
