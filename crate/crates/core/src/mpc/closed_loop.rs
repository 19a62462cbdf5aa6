//! Receding-horizon closed loop: measure (or estimate) the plant state,
//! re-plan, apply the next block of controls, repeat.

use nalgebra::DVector;

use super::super::dynamics::{step_truth, BilinearModel, Liouvillian};
use super::super::qcore::{
    partial_trace, real_embed_vec, vectorize, QuantumState, RVec, Subsystem,
};
use super::sqp::{shift_warm_start, sqp_solve, GuessTrajectory};
use super::{MpcConfig, MpcError, ReplanMode};

/// Maps a (possibly larger) plant density matrix onto the controller's model
/// state space.
#[derive(Debug, Clone)]
pub enum FeedbackAdapter {
    /// Plant and model share the same Hilbert space.
    Full,
    /// Keep the top-left `levels x levels` block of the plant density matrix
    /// without renormalizing; leakage out of the subspace shows up as lost
    /// trace rather than being hidden.
    SubspaceTruncate { levels: usize },
    /// Bipartite plant mapped to the direct sum of its two reduced states
    /// (the layout of [`BilinearModel::direct_sum`]).
    ReducedPair { dims: (usize, usize) },
}

impl FeedbackAdapter {
    pub fn measure(&self, state: &QuantumState) -> Result<RVec, MpcError> {
        match self {
            FeedbackAdapter::Full => Ok(state.to_real_vec()),
            FeedbackAdapter::SubspaceTruncate { levels } => {
                let n = *levels;
                if n > state.dim() {
                    return Err(MpcError::BadConfig(format!(
                        "cannot truncate a {}-level state to {n} levels",
                        state.dim()
                    )));
                }
                let block = state.rho().view((0, 0), (n, n)).clone_owned();
                Ok(real_embed_vec(&vectorize(&block)))
            }
            FeedbackAdapter::ReducedPair { dims } => {
                let rho_a = partial_trace(state.rho(), *dims, Subsystem::A)?;
                let rho_b = partial_trace(state.rho(), *dims, Subsystem::B)?;
                let va = real_embed_vec(&vectorize(&rho_a));
                let vb = real_embed_vec(&vectorize(&rho_b));
                let mut out = DVector::zeros(va.len() + vb.len());
                out.rows_mut(0, va.len()).copy_from(&va);
                out.rows_mut(va.len(), vb.len()).copy_from(&vb);
                Ok(out)
            }
        }
    }
}

/// Log of one closed-loop run. States are recorded at every model step;
/// entry `t` of `controls` was applied over `[times[t], times[t + 1])`.
#[derive(Debug, Clone)]
pub struct ClosedLoopRecord {
    pub times: Vec<f64>,
    pub plant_states: Vec<QuantumState>,
    /// Adapter output at each recorded time (what the controller would see).
    pub measured: Vec<RVec>,
    pub controls: Vec<RVec>,
    /// SQP iterations spent at each re-plan.
    pub plan_iterations: Vec<usize>,
    /// Number of re-plans that had to drop slew bounds to stay feasible.
    pub slew_relaxations: usize,
}

/// Run the receding-horizon loop for `total_steps` model steps. Every
/// `cfg.feedback_period` steps the controller reads the plant state through
/// the adapter and re-plans from it; the resulting controls are applied
/// open-loop until the next measurement. The first plan runs the full SQP
/// from a cold start; later re-plans refine the shifted previous plan with a
/// single line-searched SQP iteration, which keeps them cheap and avoids
/// over-reacting to state components the model cannot actuate.
pub fn run_closed_loop(
    plant: &Liouvillian,
    model: &BilinearModel,
    cfg: &MpcConfig,
    x0: &QuantumState,
    x_ref: &RVec,
    total_steps: usize,
    adapter: &FeedbackAdapter,
) -> Result<ClosedLoopRecord, MpcError> {
    cfg.validate(model.state_dim(), model.num_controls())?;
    if plant.num_controls() != model.num_controls() {
        return Err(MpcError::BadConfig(format!(
            "plant has {} controls but model has {}",
            plant.num_controls(),
            model.num_controls()
        )));
    }
    let dt = model.dt();
    let first = adapter.measure(x0)?;
    if first.len() != model.state_dim() {
        return Err(MpcError::BadConfig(format!(
            "adapter output dimension {} does not match model state dimension {}",
            first.len(),
            model.state_dim()
        )));
    }

    let mut record = ClosedLoopRecord {
        times: vec![0.0],
        plant_states: vec![x0.clone()],
        measured: vec![first.clone()],
        controls: Vec::with_capacity(total_steps),
        plan_iterations: Vec::new(),
        slew_relaxations: 0,
    };

    let mut plant_state = x0.clone();
    let epsilon = cfg
        .u_max
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min)
        .min(0.1)
        / 10.0;
    let mut guess = GuessTrajectory::cold_start(model, first.clone(), cfg.horizon, epsilon);
    let mut u_prev: Option<RVec> = None;
    // Controller-side state estimate: refreshed from the plant every
    // feedback period, propagated by the model in between.
    let mut x_est = first;

    let mut plan: Vec<RVec> = Vec::new();
    let mut plan_offset = 0usize;

    for step in 0..total_steps {
        if step % cfg.feedback_period == 0 {
            x_est = adapter.measure(&plant_state)?;
            let mut plan_cfg = cfg.clone();
            if step > 0 && cfg.replan == ReplanMode::Refine {
                plan_cfg.sqp.max_iters = 1;
                plan_cfg.sqp.line_search = true;
            }
            let res = sqp_solve(model, &plan_cfg, &x_est, x_ref, u_prev.as_ref(), guess)?;
            record.plan_iterations.push(res.iterations);
            record.slew_relaxations += res.slew_relaxed as usize;
            plan = res.trajectory.u.clone();
            guess = shift_warm_start(&res.trajectory, model, cfg.feedback_period);
            plan_offset = step;
        }
        let mut u = plan[step - plan_offset].clone();
        // The QP satisfies the bounds only to solver tolerance; the applied
        // control saturates exactly at the actuator limits.
        for j in 0..u.len() {
            if cfg.u_max[j].is_finite() {
                u[j] = u[j].clamp(-cfg.u_max[j], cfg.u_max[j]);
            }
            if let (Some(du), Some(prev)) = (cfg.du_max.as_ref(), u_prev.as_ref()) {
                u[j] = u[j].clamp(prev[j] - du[j], prev[j] + du[j]);
            }
        }
        x_est = model.step(&x_est, &u);
        plant_state = step_truth(plant, &plant_state, &u, dt)?;
        record.times.push((step + 1) as f64 * dt);
        record.measured.push(adapter.measure(&plant_state)?);
        record.plant_states.push(plant_state.clone());
        u_prev = Some(u.clone());
        record.controls.push(u);
    }

    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::super::super::dynamics::build_liouvillian;
    use super::super::super::qcore::{
        fidelity, standard_operator, CMat, OperatorKind, QuantumState,
    };
    use super::super::super::qpsolver::SolveOptions;
    use super::super::population_weight;
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn qubit_plant(detuning: f64) -> Liouvillian {
        let hz = standard_operator(OperatorKind::PauliZ, 2).unwrap()
            * Complex64::new(detuning / 2.0, 0.0);
        let hx = standard_operator(OperatorKind::PauliX, 2).unwrap() * Complex64::new(0.5, 0.0);
        build_liouvillian(&hz, &[hx], None).unwrap()
    }

    fn qubit_cfg(horizon: usize, feedback_period: usize) -> MpcConfig {
        let q = population_weight(2, 1.0);
        MpcConfig {
            horizon,
            q: q.clone(),
            r: DMatrix::from_element(1, 1, 1e-2),
            qf: q,
            u_max: vec![2.0 * std::f64::consts::PI * 0.1],
            du_max: Some(vec![2.0 * std::f64::consts::PI * 0.04]),
            interior_slew: true,
            feedback_period,
            replan: ReplanMode::Refine,
            sqp: Default::default(),
            solver: SolveOptions::default(),
        }
    }

    #[test]
    fn full_adapter_is_real_embedding() {
        let s = QuantumState::basis_state(3, 1);
        let v = FeedbackAdapter::Full.measure(&s).unwrap();
        assert_eq!(v, s.to_real_vec());
    }

    #[test]
    fn truncate_adapter_keeps_qubit_block_without_renormalizing() {
        // A qutrit with population leaked to level 2: the truncated block
        // must keep its (sub-unit) trace.
        let mut rho = CMat::zeros(3, 3);
        rho[(0, 0)] = Complex64::new(0.6, 0.0);
        rho[(1, 1)] = Complex64::new(0.3, 0.0);
        rho[(2, 2)] = Complex64::new(0.1, 0.0);
        let s = QuantumState::new(rho).unwrap();
        let v = FeedbackAdapter::SubspaceTruncate { levels: 2 }
            .measure(&s)
            .unwrap();
        assert_eq!(v.len(), 8);
        assert_abs_diff_eq!(v[0] + v[6], 0.9, epsilon = 1e-14);
    }

    #[test]
    fn reduced_pair_adapter_splits_a_product_state() {
        let rho_a = QuantumState::basis_state(2, 1);
        let rho_b = QuantumState::basis_state(2, 0);
        let joint = rho_a.rho().kronecker(rho_b.rho());
        let s = QuantumState::new(joint).unwrap();
        let v = FeedbackAdapter::ReducedPair { dims: (2, 2) }
            .measure(&s)
            .unwrap();
        assert_eq!(v.len(), 16);
        assert_abs_diff_eq!(
            (v.rows(0, 8).clone_owned() - rho_a.to_real_vec()).amax(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            (v.rows(8, 8).clone_owned() - rho_b.to_real_vec()).amax(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn per_step_feedback_tracks_model_predictions() {
        // With feedback every step and a plant that matches the model's
        // generator, the one-step deviation between the applied model
        // prediction and the measured plant state is bounded by the local
        // Euler truncation error.
        let plant = qubit_plant(0.0);
        let dt = 0.02;
        let model = BilinearModel::discretize_first_order(&plant, dt).unwrap();
        let mut cfg = qubit_cfg(10, 1);
        cfg.u_max = vec![0.5];
        cfg.du_max = None;
        let x0 = QuantumState::basis_state(2, 0);
        let x_ref = QuantumState::basis_state(2, 1).to_real_vec();
        let rec =
            run_closed_loop(&plant, &model, &cfg, &x0, &x_ref, 20, &FeedbackAdapter::Full)
                .unwrap();

        let gen_norm = plant.drift_generator().norm()
            + 0.5 * plant.control_generators()[0].norm();
        let bound = gen_norm * gen_norm * dt * dt;
        for t in 0..20 {
            let predicted = model.step(&rec.measured[t], &rec.controls[t]);
            let err = (predicted - &rec.measured[t + 1]).norm();
            assert!(err <= bound, "step {t}: deviation {err} exceeds {bound}");
        }
    }

    #[test]
    fn closed_loop_prepares_excited_state_under_detuning() {
        // Plant detuned by -0.2 rad/ns while the model assumes resonance;
        // feedback every 7 steps still reaches |1> with high fidelity.
        let plant = qubit_plant(-0.2);
        let resonant = qubit_plant(0.0);
        let dt = 0.2;
        let model = BilinearModel::discretize_first_order(&resonant, dt).unwrap();
        let cfg = qubit_cfg(50, 7);
        let x0 = QuantumState::basis_state(2, 0);
        let target = QuantumState::basis_state(2, 1);
        let steps = 63; // 12.6 ns
        let rec = run_closed_loop(
            &plant,
            &model,
            &cfg,
            &x0,
            &target.to_real_vec(),
            steps,
            &FeedbackAdapter::Full,
        )
        .unwrap();
        let f = fidelity(rec.plant_states.last().unwrap(), &target).unwrap();
        assert!(1.0 - f < 1e-2, "final infidelity {}", 1.0 - f);
        // Applied controls respect amplitude and slew bounds.
        for (t, u) in rec.controls.iter().enumerate() {
            assert!(u[0].abs() <= cfg.u_max[0] + 1e-6);
            if t > 0 {
                assert!((u[0] - rec.controls[t - 1][0]).abs() <= cfg.du_max.as_ref().unwrap()[0] + 1e-6);
            }
        }
    }
}
