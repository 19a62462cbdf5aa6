//! Scenario implementations. Each scenario builds its plant and (possibly
//! mismatched) control model, runs its arms, writes CSV/JSON/SVG artifacts
//! plus a manifest into its output directory, and returns the JSON summary.

pub mod crosstalk;
pub mod nm;
pub mod qubit;
pub mod sweep;
pub mod transmon;

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use qmpc::dynamics::{build_liouvillian, step_truth, BilinearModel, Liouvillian};
use qmpc::mpc::{population_weight, MpcConfig, ReplanMode};
use qmpc::qcore::{fidelity, standard_operator, OperatorKind, QuantumState, RMat, RVec};
use qmpc::qpsolver::SolveOptions;

use crate::config::ScenarioConfig;
use crate::output::Summary;

pub struct RunContext<'a> {
    pub out_dir: &'a Path,
    pub seed: u64,
}

pub fn run(scenario: &str, cfg: &ScenarioConfig, ctx: &RunContext) -> Result<Summary> {
    match (scenario, cfg) {
        ("qubit_detuning", ScenarioConfig::Qubit(c)) => qubit::run(c, ctx),
        ("transmon_drag" | "drag_ladder", ScenarioConfig::Transmon(c)) => transmon::run(c, ctx),
        ("crosstalk", ScenarioConfig::Crosstalk(c)) => crosstalk::run(c, ctx),
        ("nm_comparison", ScenarioConfig::Nm(c)) => nm::run(c, ctx),
        ("feedback_sweep", ScenarioConfig::Sweep(c)) => sweep::run(c, ctx),
        _ => bail!("scenario '{scenario}' does not match the provided config"),
    }
}

/// Single qubit in the rotating frame: `H = (Δ/2)σ_z + (u/2)σ_x`.
pub fn qubit_plant(detuning: f64) -> Result<Liouvillian> {
    let hz = standard_operator(OperatorKind::PauliZ, 2)? * Complex64::new(detuning / 2.0, 0.0);
    let hx = standard_operator(OperatorKind::PauliX, 2)? * Complex64::new(0.5, 0.0);
    Ok(build_liouvillian(&hz, &[hx], None)?)
}

pub fn qubit_model(detuning: f64, dt: f64) -> Result<BilinearModel> {
    Ok(BilinearModel::discretize_first_order(
        &qubit_plant(detuning)?,
        dt,
    )?)
}

/// §3.1-style controller settings shared by the single-qubit scenarios.
pub fn mpc_config(
    q: RMat,
    num_controls: usize,
    horizon: usize,
    feedback_period: usize,
    u_max: f64,
    du_max: f64,
    r_weight: f64,
    replan: ReplanMode,
) -> MpcConfig {
    MpcConfig {
        horizon,
        q: q.clone(),
        r: DMatrix::from_diagonal_element(num_controls, num_controls, r_weight),
        qf: q,
        u_max: vec![u_max; num_controls],
        du_max: Some(vec![du_max; num_controls]),
        interior_slew: true,
        feedback_period,
        replan,
        sqp: Default::default(),
        solver: SolveOptions::default(),
    }
}

/// Open-loop rollout of a pulse on the true plant, zero-padded to
/// `total_steps`; returns the state at every grid point (length
/// `total_steps + 1`) and the applied controls.
pub fn rollout_pulse(
    plant: &Liouvillian,
    x0: &QuantumState,
    pulse: &[RVec],
    dt: f64,
    total_steps: usize,
) -> Result<(Vec<QuantumState>, Vec<RVec>)> {
    let zero = DVector::zeros(plant.num_controls());
    let mut states = vec![x0.clone()];
    let mut controls = Vec::with_capacity(total_steps);
    for t in 0..total_steps {
        let u = pulse.get(t).cloned().unwrap_or_else(|| zero.clone());
        let next = step_truth(plant, states.last().unwrap(), &u, dt)?;
        states.push(next);
        controls.push(u);
    }
    Ok((states, controls))
}

pub fn infidelities(states: &[QuantumState], target: &QuantumState) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|s| Ok(1.0 - fidelity(s, target)?))
        .collect()
}

/// Value of the most recent sample at or before `t` (grid times never land
/// exactly on arbitrary evaluation times).
pub fn value_at(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    times
        .iter()
        .zip(values)
        .rev()
        .find(|(time, _)| **time <= t + 1e-9)
        .map(|(_, v)| *v)
        .ok_or_else(|| anyhow!("no sample at or before t = {t}"))
}

/// Shortest slew-feasible area-π trapezoid on the `dt` grid.
pub fn shortest_pi_pulse(dt: f64, u_max: f64, du_max: f64) -> Result<Vec<f64>> {
    for steps in 1..100_000 {
        if let Ok(p) = qmpc::baselines::area_pi_pulse(steps as f64 * dt, dt, u_max, du_max) {
            return Ok(p);
        }
    }
    bail!("no feasible area-π pulse for u_max {u_max}, du_max {du_max}")
}

/// Per-sample flags column: marks the grid points where the controller read
/// the plant state.
pub fn measurement_flags(num_samples: usize, feedback_period: usize) -> Vec<String> {
    (0..num_samples)
        .map(|t| {
            if t + 1 < num_samples && t % feedback_period == 0 {
                "measured".to_string()
            } else {
                String::new()
            }
        })
        .collect()
}

/// Count of logged controls violating the amplitude or slew bounds beyond
/// `1e-6`; the summaries must report zero.
pub fn constraint_violations(controls: &[RVec], u_max: f64, du_max: f64) -> usize {
    let mut count = 0;
    for (t, u) in controls.iter().enumerate() {
        for j in 0..u.len() {
            if u[j].abs() > u_max + 1e-6 {
                count += 1;
            }
            if t > 0 && (u[j] - controls[t - 1][j]).abs() > du_max + 1e-6 {
                count += 1;
            }
        }
    }
    count
}

pub fn controls_rows(controls: &[RVec]) -> Vec<Vec<f64>> {
    controls.iter().map(|u| u.iter().copied().collect()).collect()
}

pub fn state_rows(states: &[QuantumState]) -> Vec<Vec<f64>> {
    states
        .iter()
        .map(|s| s.to_real_vec().iter().copied().collect())
        .collect()
}

pub fn grid_times(total_steps: usize, dt: f64) -> Vec<f64> {
    (0..=total_steps).map(|t| t as f64 * dt).collect()
}

pub fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

/// Population ⟨j|ρ|j⟩ series for plotting.
pub fn population_series(states: &[QuantumState], level: usize) -> Vec<f64> {
    states.iter().map(|s| s.rho()[(level, level)].re).collect()
}

pub fn two_level_q() -> RMat {
    population_weight(2, 1.0)
}

pub fn num(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

pub fn config_json(cfg: &impl serde::Serialize) -> Result<serde_json::Value> {
    serde_json::to_value(cfg).context("serializing config snapshot")
}
