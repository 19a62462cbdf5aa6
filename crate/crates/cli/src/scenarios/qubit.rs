//! Single-qubit state preparation with a detuned plant: an analytic area-π
//! pulse (which the detuning defeats) against closed-loop MPC whose model
//! assumes perfect resonance.

use anyhow::Result;
use nalgebra::DVector;

use qmpc::baselines::to_controls;
use qmpc::mpc::{run_closed_loop, FeedbackAdapter, ReplanMode};
use qmpc::qcore::QuantumState;

use super::{
    config_json, constraint_violations, controls_rows, grid_times, infidelities, mpc_config, num,
    qubit_model, qubit_plant, measurement_flags, rollout_pulse, shortest_pi_pulse, state_rows,
    steps_for, two_level_q, value_at, RunContext,
};
use crate::config::QubitConfig;
use crate::output::{settling_time, trajectory_table, Emitter, Series, Summary};

pub fn run(cfg: &QubitConfig, ctx: &RunContext) -> Result<Summary> {
    let started = std::time::Instant::now();
    let mut emit = Emitter::new(ctx.out_dir)?;

    let plant = qubit_plant(cfg.detuning)?;
    let model = qubit_model(0.0, cfg.dt)?;
    let x0 = QuantumState::basis_state(2, 0);
    let target = QuantumState::basis_state(2, 1);
    let total_steps = steps_for(cfg.duration, cfg.dt);
    let times = grid_times(total_steps, cfg.dt);

    // Arm (i): analytic area-π trapezoid, applied open loop and zero-padded
    // to the full duration.
    let pulse = to_controls(&shortest_pi_pulse(cfg.dt, cfg.u_max, cfg.du_max)?);
    let (pi_states, pi_controls) = rollout_pulse(&plant, &x0, &pulse, cfg.dt, total_steps)?;
    let pi_infid = infidelities(&pi_states, &target)?;
    emit.csv(
        "pi_pulse.csv",
        &trajectory_table(
            &times,
            &controls_rows(&pi_controls),
            &state_rows(&pi_states),
            &pi_infid,
            &vec![String::new(); times.len()],
        ),
    )?;

    // Arm (ii): closed-loop MPC with the resonant model.
    let mpc = mpc_config(
        two_level_q(),
        1,
        cfg.horizon,
        cfg.feedback_period,
        cfg.u_max,
        cfg.du_max,
        cfg.r_weight,
        ReplanMode::Refine,
    );
    let rec = run_closed_loop(
        &plant,
        &model,
        &mpc,
        &x0,
        &target.to_real_vec(),
        total_steps,
        &FeedbackAdapter::Full,
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

    let series = |times: &[f64], vals: &[f64]| -> Vec<(f64, f64)> {
        times.iter().copied().zip(vals.iter().copied()).collect()
    };
    emit.svg(
        "infidelity.svg",
        "State-preparation infidelity",
        "time [ns]",
        "log10 infidelity",
        &[
            Series {
                label: "pi pulse".into(),
                points: series(&times, &log10_clip(&pi_infid)),
            },
            Series {
                label: "mpc".into(),
                points: series(&rec.times, &log10_clip(&mpc_infid)),
            },
        ],
    )?;
    let control_of = |cs: &[DVector<f64>]| -> Vec<f64> { cs.iter().map(|u| u[0]).collect() };
    emit.svg(
        "controls.svg",
        "Applied control",
        "time [ns]",
        "u [rad/ns]",
        &[
            Series {
                label: "pi pulse".into(),
                points: series(&times[..total_steps], &control_of(&pi_controls)),
            },
            Series {
                label: "mpc".into(),
                points: series(&rec.times[..total_steps], &control_of(&rec.controls)),
            },
        ],
    )?;
    emit.svg(
        "populations.svg",
        "MPC populations",
        "time [ns]",
        "population",
        &[
            Series {
                label: "rho_00".into(),
                points: series(&rec.times, &super::population_series(&rec.plant_states, 0)),
            },
            Series {
                label: "rho_11".into(),
                points: series(&rec.times, &super::population_series(&rec.plant_states, 1)),
            },
        ],
    )?;

    let pi_eval = value_at(&times, &pi_infid, cfg.eval_time)?;
    let mpc_eval = value_at(&rec.times, &mpc_infid, cfg.eval_time)?;
    let violations = constraint_violations(&pi_controls, cfg.u_max, cfg.du_max)
        + constraint_violations(&rec.controls, cfg.u_max, cfg.du_max);

    let mut summary = Summary::new();
    summary.insert("eval_time_ns".into(), num(cfg.eval_time));
    summary.insert("success_threshold".into(), num(cfg.success_threshold));
    summary.insert("pi_pulse_infidelity".into(), num(pi_eval));
    summary.insert("mpc_infidelity".into(), num(mpc_eval));
    summary.insert(
        "separation_orders_of_magnitude".into(),
        num((pi_eval / mpc_eval).log10()),
    );
    summary.insert(
        "mpc_settling_time_ns".into(),
        settling_time(&rec.times, &mpc_infid, cfg.success_threshold)
            .map_or(serde_json::Value::Null, num),
    );
    summary.insert(
        "pi_pulse_settling_time_ns".into(),
        settling_time(&times, &pi_infid, cfg.success_threshold)
            .map_or(serde_json::Value::Null, num),
    );
    summary.insert("constraint_violations".into(), violations.into());
    summary.insert(
        "slew_relaxations".into(),
        rec.slew_relaxations.into(),
    );
    emit.json("summary.json", &summary)?;
    emit.finish("qubit_detuning", ctx.seed, config_json(cfg)?, started)?;
    Ok(summary)
}

fn log10_clip(vals: &[f64]) -> Vec<f64> {
    vals.iter().map(|v| v.max(1e-12).log10()).collect()
}
