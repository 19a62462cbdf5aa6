//! Closed-loop infidelity over a (plant detuning) × (feedback period) grid,
//! re-planning at every measurement. Cells are independent and
//! run in parallel; results are collected in grid order so the emitted
//! table does not depend on scheduling.

use anyhow::Result;
use rayon::prelude::*;

use qmpc::mpc::{run_closed_loop, FeedbackAdapter, ReplanMode};
use qmpc::qcore::QuantumState;

use super::{
    config_json, constraint_violations, infidelities, mpc_config, num, qubit_model, qubit_plant,
    steps_for, two_level_q, value_at, RunContext,
};
use crate::config::SweepConfig;
use crate::output::{fmt_num, CsvTable, Emitter, Series, Summary};

pub fn run(cfg: &SweepConfig, ctx: &RunContext) -> Result<Summary> {
    let started = std::time::Instant::now();
    let mut emit = Emitter::new(ctx.out_dir)?;

    let deltas: Vec<f64> = (0..cfg.grid_points)
        .map(|i| {
            -cfg.detuning_span
                + 2.0 * cfg.detuning_span * i as f64 / (cfg.grid_points - 1).max(1) as f64
        })
        .collect();
    let periods: Vec<usize> = (cfg.min_period..=cfg.max_period).collect();
    let total_steps = steps_for(cfg.duration, cfg.dt);
    let model = qubit_model(0.0, cfg.dt)?;
    let x0 = QuantumState::basis_state(2, 0);
    let target = QuantumState::basis_state(2, 1);
    let x_ref = target.to_real_vec();

    let cells: Vec<(usize, usize)> = deltas
        .iter()
        .enumerate()
        .flat_map(|(i, _)| periods.iter().enumerate().map(move |(j, _)| (i, j)))
        .collect();

    let results: Vec<Result<(f64, usize)>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let plant = qubit_plant(deltas[i])?;
            let mpc = mpc_config(
                two_level_q(),
                1,
                cfg.horizon,
                periods[j],
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
                total_steps,
                &FeedbackAdapter::Full,
            )?;
            let infid = infidelities(&rec.plant_states, &target)?;
            let at_eval = value_at(&rec.times, &infid, cfg.eval_time)?;
            Ok((at_eval, constraint_violations(&rec.controls, cfg.u_max, cfg.du_max)))
        })
        .collect();

    let mut grid = vec![vec![0.0; periods.len()]; deltas.len()];
    let mut violations = 0;
    for (&(i, j), res) in cells.iter().zip(results) {
        let (v, viol) = res?;
        grid[i][j] = v;
        violations += viol;
    }

    let rows = cells
        .iter()
        .map(|&(i, j)| {
            vec![
                fmt_num(deltas[i]),
                periods[j].to_string(),
                fmt_num(grid[i][j]),
            ]
        })
        .collect();
    emit.csv(
        "grid.csv",
        &CsvTable {
            header: vec![
                "detuning_rad_per_ns".into(),
                "feedback_period_steps".into(),
                "infidelity".into(),
            ],
            rows,
        },
    )?;

    emit.svg(
        "sweep.svg",
        "Infidelity vs feedback period",
        "feedback period [steps]",
        "log10 infidelity",
        &deltas
            .iter()
            .enumerate()
            .map(|(i, d)| Series {
                label: format!("delta {d:.2}"),
                points: periods
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| (p as f64, grid[i][j].max(1e-12).log10()))
                    .collect(),
            })
            .collect::<Vec<_>>(),
    )?;

    let grid_min = grid
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let zero_row = deltas
        .iter()
        .position(|&d| d.abs() < 1e-12)
        .unwrap_or(deltas.len() / 2);
    let largest = deltas
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut summary = Summary::new();
    summary.insert("eval_time_ns".into(), num(cfg.eval_time));
    summary.insert("grid_min_infidelity".into(), num(grid_min));
    summary.insert(
        "zero_detuning_row".into(),
        grid[zero_row].iter().map(|&v| num(v)).collect::<Vec<_>>().into(),
    );
    summary.insert(
        "largest_detuning_row".into(),
        grid[largest].iter().map(|&v| num(v)).collect::<Vec<_>>().into(),
    );
    summary.insert("largest_detuning".into(), num(deltas[largest]));
    summary.insert("constraint_violations".into(), violations.into());
    emit.json("summary.json", &summary)?;
    emit.finish("feedback_sweep", ctx.seed, config_json(cfg)?, started)?;
    Ok(summary)
}
