//! Pulse calibration budgeted in quantum state tomography (QST)
//! evaluations: closed-loop MPC (one QST per feedback step) against
//! Nelder-Mead descent on the final-state infidelity, seeded either by
//! model-derived pulses or at random.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmpc::baselines::{nelder_mead_calibrate, open_loop_optimal_pulse, seed_simplex, to_controls};
use qmpc::dynamics::step_truth;
use qmpc::mpc::{run_closed_loop, FeedbackAdapter, ReplanMode};
use qmpc::qcore::{fidelity, QuantumState};

use super::{
    config_json, constraint_violations, infidelities, mpc_config, num, qubit_model, qubit_plant,
    steps_for, two_level_q, RunContext,
};
use crate::config::NmConfig;
use crate::output::{fmt_num, CsvTable, Emitter, Series, Summary};

pub fn run(cfg: &NmConfig, ctx: &RunContext) -> Result<Summary> {
    let started = std::time::Instant::now();
    let mut emit = Emitter::new(ctx.out_dir)?;

    let steps = steps_for(cfg.duration, cfg.dt);
    let plant = qubit_plant(0.0)?;
    let x0 = QuantumState::basis_state(2, 0);
    let target = QuantumState::basis_state(2, 1);
    let x_ref = target.to_real_vec();

    let deltas: Vec<f64> = (0..cfg.grid_points)
        .map(|i| {
            -cfg.detuning_span
                + 2.0 * cfg.detuning_span * i as f64 / (cfg.grid_points - 1).max(1) as f64
        })
        .collect();

    // Arm (b): closed-loop MPC per model detuning; the plant itself is on
    // resonance. One QST iteration per feedback step.
    let mut mpc_curves: Vec<Vec<f64>> = Vec::new();
    let mut mpc_final = Vec::new();
    let mut success_iters = Vec::new();
    let mut violations = 0;
    for &delta in &deltas {
        let model = qubit_model(delta, cfg.dt)?;
        let mpc = mpc_config(
            two_level_q(),
            1,
            cfg.horizon,
            1,
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
            &x_ref,
            steps,
            &FeedbackAdapter::Full,
        )?;
        let infid = infidelities(&rec.plant_states, &target)?;
        violations += constraint_violations(&rec.controls, cfg.u_max, cfg.du_max);
        success_iters.push(
            infid[1..]
                .iter()
                .position(|&v| v < cfg.success_threshold)
                .map(|k| k + 1),
        );
        mpc_final.push(*infid.last().unwrap());
        mpc_curves.push(infid);
    }

    // Shared objective for both Nelder-Mead arms: one QST evaluation =
    // rolling the candidate pulse out on the true plant and reading the
    // final infidelity.
    let evaluate = |params: &[f64]| -> f64 {
        let controls = to_controls(params);
        let mut state = x0.clone();
        for u in &controls {
            state = match step_truth(&plant, &state, u, cfg.dt) {
                Ok(s) => s,
                Err(_) => return f64::INFINITY,
            };
        }
        fidelity(&state, &target).map_or(f64::INFINITY, |f| 1.0 - f)
    };

    // Arm (c): simplex of the 11 model-optimal open-loop pulses.
    let mpc_cfg_open = mpc_config(
        two_level_q(),
        1,
        steps,
        1,
        cfg.u_max,
        cfg.du_max,
        cfg.r_weight,
        ReplanMode::Refine,
    );
    let model_simplex: Vec<Vec<f64>> = deltas
        .iter()
        .map(|&delta| -> Result<Vec<f64>> {
            let model = qubit_model(delta, cfg.dt)?;
            let pulse =
                open_loop_optimal_pulse(&model, &x0.to_real_vec(), &x_ref, &mpc_cfg_open)?;
            Ok(pulse.iter().map(|u| u[0]).collect())
        })
        .collect::<Result<_>>()?;
    let nm_iters = 4 * cfg.max_evals;
    let model_aware = nelder_mead_calibrate(evaluate, &model_simplex, nm_iters)?;

    // Arm (d): random seed pulses, one simplex per trial.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut random_histories: Vec<Vec<f64>> = Vec::new();
    for _ in 0..cfg.random_trials {
        let seed: Vec<f64> = (0..steps)
            .map(|_| rng.gen_range(-cfg.u_max..cfg.u_max))
            .collect();
        let simplex = seed_simplex(&seed, cfg.du_max);
        let res = nelder_mead_calibrate(evaluate, &simplex, nm_iters)?;
        random_histories.push(best_so_far(&res.history));
    }
    let setup_evals = steps + 1;
    let random_at_budget: Vec<f64> = random_histories
        .iter()
        .map(|h| h[(cfg.max_evals - 1).min(h.len() - 1)])
        .collect();
    let random_mean =
        random_at_budget.iter().sum::<f64>() / random_at_budget.len().max(1) as f64;
    let random_std = (random_at_budget
        .iter()
        .map(|v| (v - random_mean).powi(2))
        .sum::<f64>()
        / random_at_budget.len().max(1) as f64)
        .sqrt();
    let mpc_mean = mpc_final.iter().sum::<f64>() / mpc_final.len() as f64;

    // MPC infidelity vs QST iteration, one column per model detuning.
    let mut header = vec!["qst_iteration".to_string()];
    header.extend(deltas.iter().map(|d| format!("infidelity_delta_{d:.3}")));
    let rows = (0..=steps)
        .map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(mpc_curves.iter().map(|c| fmt_num(c[t])));
            row
        })
        .collect();
    emit.csv("mpc_curves.csv", &CsvTable { header, rows })?;

    // Best objective so far vs QST evaluation count for both NM arms.
    let aware_best = best_so_far(&model_aware.history);
    let max_len = random_histories
        .iter()
        .map(|h| h.len())
        .chain([aware_best.len()])
        .max()
        .unwrap_or(0);
    let header = vec![
        "qst_evaluation".to_string(),
        "model_aware_best".to_string(),
        "random_mean_best".to_string(),
        "random_std_best".to_string(),
    ];
    let rows = (0..max_len)
        .map(|k| {
            let at = |h: &Vec<f64>| h[k.min(h.len() - 1)];
            let vals: Vec<f64> = random_histories.iter().map(at).collect();
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / vals.len().max(1) as f64)
                .sqrt();
            vec![
                (k + 1).to_string(),
                fmt_num(at(&aware_best)),
                fmt_num(mean),
                fmt_num(std),
            ]
        })
        .collect();
    emit.csv("nm_histories.csv", &CsvTable { header, rows })?;

    emit.svg(
        "mpc_curves.svg",
        "MPC infidelity vs QST iteration",
        "QST iteration",
        "log10 infidelity",
        &mpc_curves
            .iter()
            .zip(&deltas)
            .map(|(c, d)| Series {
                label: format!("delta {d:.2}"),
                points: c
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| (t as f64, v.max(1e-12).log10()))
                    .collect(),
            })
            .collect::<Vec<_>>(),
    )?;

    let mut summary = Summary::new();
    summary.insert("success_threshold".into(), num(cfg.success_threshold));
    summary.insert(
        "mpc_final_infidelities".into(),
        mpc_final.iter().map(|&v| num(v)).collect::<Vec<_>>().into(),
    );
    summary.insert(
        "mpc_success_iterations".into(),
        success_iters
            .iter()
            .map(|s| s.map_or(serde_json::Value::Null, |k| k.into()))
            .collect::<Vec<_>>()
            .into(),
    );
    summary.insert("mpc_mean_infidelity".into(), num(mpc_mean));
    summary.insert("model_aware_setup_evals".into(), setup_evals.into());
    summary.insert(
        "model_aware_best_infidelity".into(),
        num(model_aware.best_value),
    );
    summary.insert(
        "random_mean_infidelity_at_budget".into(),
        num(random_mean),
    );
    summary.insert("random_std_infidelity_at_budget".into(), num(random_std));
    summary.insert("qst_budget".into(), cfg.max_evals.into());
    summary.insert("constraint_violations".into(), violations.into());
    emit.json("summary.json", &summary)?;
    emit.finish("nm_comparison", ctx.seed, config_json(cfg)?, started)?;
    Ok(summary)
}

fn best_so_far(history: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    history
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}
