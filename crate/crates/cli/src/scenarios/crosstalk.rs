//! Simultaneous |11⟩ preparation on two qubits with an always-on ZZ
//! coupling the controller's model does not contain. Independent π pulses
//! succeed without the coupling and fail with it; MPC with reduced-state
//! feedback recovers the preparation.

use anyhow::Result;
use nalgebra::DVector;
use num_complex::Complex64;

use qmpc::baselines::area_pi_pulse;
use qmpc::dynamics::{build_liouvillian, BilinearModel, Liouvillian};
use qmpc::mpc::{run_closed_loop, FeedbackAdapter, ReplanMode};
use qmpc::qcore::{
    fidelity, standard_operator, OperatorKind, QuantumState, RMat, RVec,
};

use super::{
    config_json, constraint_violations, controls_rows, grid_times, infidelities,
    measurement_flags, mpc_config, num, rollout_pulse, state_rows, steps_for, value_at,
    RunContext,
};
use crate::config::CrosstalkConfig;
use crate::output::{settling_time, trajectory_table, Emitter, Series, Summary};

/// `H = (ξ/2) σ_z⊗σ_z + (u_A/2) σ_x⊗I + (u_B/2) I⊗σ_y`; the two qubits are
/// driven on different axes so their trajectories stay distinguishable.
fn joint_plant(coupling: f64) -> Result<Liouvillian> {
    let sx = standard_operator(OperatorKind::PauliX, 2)?;
    let sy = standard_operator(OperatorKind::PauliY, 2)?;
    let sz = standard_operator(OperatorKind::PauliZ, 2)?;
    let id = standard_operator(OperatorKind::Identity, 2)?;
    let h0 = sz.kronecker(&sz) * Complex64::new(coupling / 2.0, 0.0);
    let ha = sx.kronecker(&id) * Complex64::new(0.5, 0.0);
    let hb = id.kronecker(&sy) * Complex64::new(0.5, 0.0);
    Ok(build_liouvillian(&h0, &[ha, hb], None)?)
}

/// The controller's model: two independent resonant qubits (no coupling),
/// stacked as a direct sum to match the reduced-pair feedback layout.
fn pair_model(dt: f64) -> Result<BilinearModel> {
    let sx = standard_operator(OperatorKind::PauliX, 2)? * Complex64::new(0.5, 0.0);
    let sy = standard_operator(OperatorKind::PauliY, 2)? * Complex64::new(0.5, 0.0);
    let zero = qmpc::qcore::CMat::zeros(2, 2);
    let qubit_a = BilinearModel::discretize_first_order(&build_liouvillian(&zero, &[sx], None)?, dt)?;
    let qubit_b = BilinearModel::discretize_first_order(&build_liouvillian(&zero, &[sy], None)?, dt)?;
    Ok(qubit_a.direct_sum(&qubit_b)?)
}

/// Population-only weight on both blocks of the direct-sum state.
fn pair_population_q() -> RMat {
    let mut q = RMat::zeros(16, 16);
    for base in [0, 8] {
        for k in qmpc::qcore::population_indices(2) {
            q[(base + k, base + k)] = 1.0;
        }
    }
    q
}

pub fn run(cfg: &CrosstalkConfig, ctx: &RunContext) -> Result<Summary> {
    let started = std::time::Instant::now();
    let mut emit = Emitter::new(ctx.out_dir)?;

    let total_steps = steps_for(cfg.duration, cfg.dt);
    let times = grid_times(total_steps, cfg.dt);
    let x0 = QuantumState::basis_state(4, 0);
    let target = QuantumState::basis_state(4, 3);

    // Identical π pulses on both channels (each rotates its qubit by π
    // about its own drive axis).
    let trapezoid = area_pi_pulse(
        shortest_feasible_duration(cfg.dt, cfg.u_max, cfg.du_max)?,
        cfg.dt,
        cfg.u_max,
        cfg.du_max,
    )?;
    let pulse: Vec<RVec> = trapezoid
        .iter()
        .map(|&v| DVector::from_vec(vec![v, v]))
        .collect();

    let mut summary = Summary::new();
    summary.insert("success_threshold".into(), num(cfg.success_threshold));
    let mut infid_series = Vec::new();

    let mut open_arm = |name: &str, plant: &Liouvillian| -> Result<Vec<f64>> {
        let (states, controls) = rollout_pulse(plant, &x0, &pulse, cfg.dt, total_steps)?;
        let infid = infidelities(&states, &target)?;
        emit.csv(
            &format!("{name}.csv"),
            &trajectory_table(
                &times,
                &controls_rows(&controls),
                &state_rows(&states),
                &infid,
                &vec![String::new(); times.len()],
            ),
        )?;
        infid_series.push(Series {
            label: name.replace('_', " "),
            points: times.iter().zip(&infid).map(|(&t, &v)| (t, v)).collect(),
        });
        Ok(infid)
    };

    let free_infid = open_arm("pi_pulses_no_crosstalk", &joint_plant(0.0)?)?;
    let coupled_infid = open_arm("pi_pulses_crosstalk", &joint_plant(cfg.coupling)?)?;

    // MPC arm: crosstalk plant, uncoupled pair model, reduced feedback.
    let plant = joint_plant(cfg.coupling)?;
    let model = pair_model(cfg.dt)?;
    let mpc = mpc_config(
        pair_population_q(),
        2,
        cfg.horizon,
        cfg.feedback_period,
        cfg.u_max,
        cfg.du_max,
        cfg.r_weight,
        ReplanMode::FullSqp,
    );
    let excited = QuantumState::basis_state(2, 1).to_real_vec();
    let mut x_ref = DVector::zeros(16);
    x_ref.rows_mut(0, 8).copy_from(&excited);
    x_ref.rows_mut(8, 8).copy_from(&excited);
    let rec = run_closed_loop(
        &plant,
        &model,
        &mpc,
        &x0,
        &x_ref,
        total_steps,
        &FeedbackAdapter::ReducedPair { dims: (2, 2) },
    )?;
    let mpc_infid = infidelities(&rec.plant_states, &target)?;
    emit.csv(
        "mpc.csv",
        &trajectory_table(
            &rec.times,
            &controls_rows(&rec.controls),
            &state_rows(&rec.plant_states),
            &mpc_infid,
            &measurement_flags(rec.times.len(), cfg.feedback_period),
        ),
    )?;
    infid_series.push(Series {
        label: "mpc crosstalk".into(),
        points: rec.times.iter().zip(&mpc_infid).map(|(&t, &v)| (t, v)).collect(),
    });

    emit.svg(
        "infidelity.svg",
        "Joint |11> preparation infidelity",
        "time [ns]",
        "infidelity",
        &infid_series,
    )?;
    emit.svg(
        "mpc_controls.svg",
        "MPC controls",
        "time [ns]",
        "u [rad/ns]",
        &[
            Series {
                label: "u_A".into(),
                points: rec.times[..total_steps]
                    .iter()
                    .zip(&rec.controls)
                    .map(|(&t, u)| (t, u[0]))
                    .collect(),
            },
            Series {
                label: "u_B".into(),
                points: rec.times[..total_steps]
                    .iter()
                    .zip(&rec.controls)
                    .map(|(&t, u)| (t, u[1]))
                    .collect(),
            },
        ],
    )?;

    let eval = cfg.duration.min(*rec.times.last().unwrap());
    let mpc_final = value_at(&rec.times, &mpc_infid, eval)?;
    let coupled_final = value_at(&times, &coupled_infid, eval)?;
    let last = rec.plant_states.last().unwrap();
    summary.insert(
        "mpc_joint_fidelity".into(),
        num(fidelity(last, &target)?),
    );
    summary.insert("mpc_infidelity".into(), num(mpc_final));
    summary.insert("pi_pulse_crosstalk_infidelity".into(), num(coupled_final));
    summary.insert(
        "pi_pulse_no_crosstalk_infidelity".into(),
        num(*free_infid.last().unwrap()),
    );
    summary.insert(
        "mpc_settling_time_ns".into(),
        settling_time(&rec.times, &mpc_infid, cfg.success_threshold)
            .map_or(serde_json::Value::Null, num),
    );
    summary.insert(
        "no_crosstalk_settling_time_ns".into(),
        settling_time(&times, &free_infid, cfg.success_threshold)
            .map_or(serde_json::Value::Null, num),
    );
    summary.insert(
        "constraint_violations".into(),
        constraint_violations(&rec.controls, cfg.u_max, cfg.du_max).into(),
    );
    emit.json("summary.json", &summary)?;
    emit.finish("crosstalk", ctx.seed, config_json(cfg)?, started)?;
    Ok(summary)
}

fn shortest_feasible_duration(dt: f64, u_max: f64, du_max: f64) -> Result<f64> {
    for steps in 1..100_000 {
        let duration = steps as f64 * dt;
        if area_pi_pulse(duration, dt, u_max, du_max).is_ok() {
            return Ok(duration);
        }
    }
    anyhow::bail!("no feasible area-π pulse for u_max {u_max}, du_max {du_max}")
}
