//! End-to-end acceptance gate. Each numbered criterion runs the relevant
//! scenario with its default configuration into a temporary directory,
//! checks the published thresholds, and prints one pass/fail line. The
//! whole gate is a single test so the lines always appear together.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qmpc::dynamics::{build_liouvillian, linearize, step_truth, BilinearModel};
use qmpc::qcore::{
    real_embed, standard_operator, state_norm_identity_check, vectorize, CMat, CVec,
    OperatorKind, QuantumState, RVec,
};
use qmpc::qpsolver::{solve, CscMatrix, QPProblem, SolveOptions, SolveStatus};

use qmpc_cli::config::{
    CrosstalkConfig, NmConfig, QubitConfig, SweepConfig, TransmonConfig,
};
use qmpc_cli::output::Summary;
use qmpc_cli::scenarios::{self, RunContext};

fn num(summary: &Summary, key: &str) -> f64 {
    summary
        .get(key)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("summary key {key} missing or not a number"))
}

fn num_array(summary: &Summary, key: &str) -> Vec<Option<f64>> {
    summary
        .get(key)
        .and_then(Value::as_array)
        .unwrap_or_else(|| panic!("summary key {key} missing or not an array"))
        .iter()
        .map(Value::as_f64)
        .collect()
}

fn ctx(dir: &std::path::Path) -> RunContext<'_> {
    RunContext { out_dir: dir, seed: 0 }
}

struct Gate {
    lines: Vec<(usize, bool, String)>,
}

impl Gate {
    fn record(&mut self, n: usize, pass: bool, detail: String) {
        println!("criterion {n}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        self.lines.push((n, pass, detail));
    }
}

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut gate = Gate { lines: Vec::new() };
    let mut total_violations = 0.0;

    // Criterion 1: detuned qubit, analytic pi pulse vs closed-loop MPC.
    {
        let t0 = Instant::now();
        let s = scenarios::qubit::run(&QubitConfig::default(), &ctx(&tmp.path().join("c1")))
            .expect("qubit scenario");
        let elapsed = t0.elapsed().as_secs_f64();
        let pi = num(&s, "pi_pulse_infidelity");
        let mpc = num(&s, "mpc_infidelity");
        let sep = num(&s, "separation_orders_of_magnitude");
        total_violations += num(&s, "constraint_violations");
        let pass = pi > 1e-1 && mpc < 1e-2 && sep >= 1.0 && elapsed < 30.0;
        gate.record(
            1,
            pass,
            format!("pi pulse {pi:.3e}, mpc {mpc:.3e}, separation {sep:.2} orders, {elapsed:.1} s"),
        );
    }

    // Criterion 2: DRAG ladder ordering across the five anharmonic-qubit cases.
    {
        let t0 = Instant::now();
        let s = scenarios::transmon::run(
            &TransmonConfig::default(),
            &ctx(&tmp.path().join("c2")),
        )
        .expect("drag ladder scenario");
        let elapsed = t0.elapsed().as_secs_f64();
        let get = |c: char| num(&s, &format!("case_{c}_final_infidelity"));
        let (a, b, c, d, e) = (get('a'), get('b'), get('c'), get('d'), get('e'));
        total_violations += num(&s, "constraint_violations");
        let pass = a > b && b > d && c <= b && e < a && elapsed < 120.0;
        gate.record(
            2,
            pass,
            format!("a={a:.3e} b={b:.3e} c={c:.3e} d={d:.3e} e={e:.3e}, {elapsed:.1} s"),
        );
    }

    // Criterion 3: coupled qubits, crosstalk-blind pi pulses vs reduced-model MPC.
    {
        let t0 = Instant::now();
        let s = scenarios::crosstalk::run(
            &CrosstalkConfig::default(),
            &ctx(&tmp.path().join("c3")),
        )
        .expect("crosstalk scenario");
        let elapsed = t0.elapsed().as_secs_f64();
        let pi_joint = 1.0 - num(&s, "pi_pulse_crosstalk_infidelity");
        let mpc_joint = num(&s, "mpc_joint_fidelity");
        let mpc_settle = num(&s, "mpc_settling_time_ns");
        let free_settle = num(&s, "no_crosstalk_settling_time_ns");
        total_violations += num(&s, "constraint_violations");
        let pass = pi_joint < 0.9
            && mpc_joint > 0.99
            && mpc_settle > 20.0
            && free_settle < 10.0
            && elapsed < 120.0;
        gate.record(
            3,
            pass,
            format!(
                "pi joint fidelity {pi_joint:.3}, mpc {mpc_joint:.4}, settling {mpc_settle:.1} vs {free_settle:.1} ns, {elapsed:.1} s"
            ),
        );
    }

    // Criterion 4: online MPC vs offline Nelder-Mead calibration budgets.
    {
        let t0 = Instant::now();
        let s = scenarios::nm::run(&NmConfig::default(), &ctx(&tmp.path().join("c4")))
            .expect("nm scenario");
        let elapsed = t0.elapsed().as_secs_f64();
        let iters = num_array(&s, "mpc_success_iterations");
        let budget = num(&s, "qst_budget");
        let all_converge = !iters.is_empty() && iters.iter().all(|v| matches!(v, Some(k) if *k <= budget));
        let setup = num(&s, "model_aware_setup_evals");
        let rand_mean = num(&s, "random_mean_infidelity_at_budget");
        let mpc_mean = num(&s, "mpc_mean_infidelity");
        total_violations += num(&s, "constraint_violations");
        let pass = all_converge
            && (setup - 11.0).abs() < 0.5
            && rand_mean > mpc_mean
            && elapsed < 300.0;
        gate.record(
            4,
            pass,
            format!(
                "all detunings within {budget} iterations: {all_converge}, simplex setup {setup} evals, random {rand_mean:.3e} vs mpc {mpc_mean:.3e}, {elapsed:.1} s"
            ),
        );
    }

    // Criterion 5: detuning x feedback-period sweep trends.
    {
        let t0 = Instant::now();
        let s = scenarios::sweep::run(&SweepConfig::default(), &ctx(&tmp.path().join("c5")))
            .expect("sweep scenario");
        let elapsed = t0.elapsed().as_secs_f64();
        let grid_min = num(&s, "grid_min_infidelity");
        let zero: Vec<f64> = num_array(&s, "zero_detuning_row")
            .into_iter()
            .map(|v| v.expect("zero row entry"))
            .collect();
        let worst: Vec<f64> = num_array(&s, "largest_detuning_row")
            .into_iter()
            .map(|v| v.expect("largest row entry"))
            .collect();
        total_violations += num(&s, "constraint_violations");
        let zero_ok = zero.iter().all(|&v| v <= 2.0 * grid_min);
        // Non-improving with a 20% noise tolerance: no step down the row may
        // drop more than 20% below its predecessor.
        let trend_ok = worst.windows(2).all(|w| w[1] >= 0.8 * w[0]);
        let pass = zero_ok && trend_ok && elapsed < 600.0;
        gate.record(
            5,
            pass,
            format!(
                "zero row max/min {:.2}, largest-detuning trend non-improving: {trend_ok}, {elapsed:.1} s",
                zero.iter().cloned().fold(0.0_f64, f64::max) / grid_min
            ),
        );
    }

    // Criterion 6: randomized property suites plus constraint satisfaction on
    // every trajectory logged above.
    {
        let t0 = Instant::now();
        let mut failures: Vec<&str> = Vec::new();
        if !vectorization_law() {
            failures.push("vectorization law");
        }
        if !embedding_homomorphism() {
            failures.push("real embedding");
        }
        if !trace_hermiticity_preserved() {
            failures.push("trace/Hermiticity");
        }
        if !norm_identity() {
            failures.push("norm identity");
        }
        if !linearization_matches_differences() {
            failures.push("linearization");
        }
        if !qp_matches_oracle() {
            failures.push("QP oracle gap");
        }
        if !euler_first_order() {
            failures.push("Euler convergence");
        }
        if total_violations != 0.0 {
            failures.push("constraint satisfaction");
        }
        let elapsed = t0.elapsed().as_secs_f64();
        let pass = failures.is_empty() && elapsed < 60.0;
        gate.record(
            6,
            pass,
            if failures.is_empty() {
                format!("7 property suites clean, 0 constraint violations, {elapsed:.1} s")
            } else {
                format!("failed: {}, {elapsed:.1} s", failures.join(", "))
            },
        );
    }

    let failed: Vec<String> = gate
        .lines
        .iter()
        .filter(|(_, pass, _)| !pass)
        .map(|(n, _, d)| format!("criterion {n}: {d}"))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn vectorization_law() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    (0..100).all(|_| {
        let a = random_cmat(&mut rng, 3, 3);
        let b = random_cmat(&mut rng, 3, 3);
        let c = random_cmat(&mut rng, 3, 3);
        let lhs = vectorize(&(&a * &b * &c));
        let rhs = a.kronecker(&c.transpose()) * vectorize(&b);
        (lhs - rhs).norm() <= 1e-12
    })
}

fn embedding_homomorphism() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    (0..100).all(|_| {
        let m = random_cmat(&mut rng, 2, 2);
        let n = random_cmat(&mut rng, 2, 2);
        (real_embed(&m) * real_embed(&n) - real_embed(&(&m * &n))).norm() <= 1e-12
            && (real_embed(&m) + real_embed(&n) - real_embed(&(&m + &n))).norm() <= 1e-12
    })
}

fn trace_hermiticity_preserved() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let hz = standard_operator(OperatorKind::PauliZ, 2).unwrap() * Complex64::new(-0.1, 0.0);
    let hx = standard_operator(OperatorKind::PauliX, 2).unwrap() * Complex64::new(0.5, 0.0);
    let plant = build_liouvillian(&hz, &[hx], None).unwrap();
    let mut state = QuantumState::basis_state(2, 0);
    for _ in 0..1000 {
        let u = DVector::from_element(1, rng.gen_range(-0.6..0.6));
        state = step_truth(&plant, &state, &u, 0.2).unwrap();
        let rho = state.rho();
        let drift = (rho.trace().re - 1.0).abs().max(rho.trace().im.abs());
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if drift > 1e-10 || herm > 1e-10 {
            return false;
        }
    }
    true
}

fn norm_identity() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    (0..100).all(|_| {
        let pure = |rng: &mut ChaCha8Rng| {
            let psi = CVec::from_fn(3, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let psi = &psi / Complex64::new(psi.norm(), 0.0);
            QuantumState::from_pure(&psi).unwrap()
        };
        let (lhs, rhs) = state_norm_identity_check(&pure(&mut rng), &pure(&mut rng)).unwrap();
        (lhs - rhs).abs() <= 1e-9
    })
}

fn linearization_matches_differences() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let hz = standard_operator(OperatorKind::PauliZ, 2).unwrap() * Complex64::new(0.3, 0.0);
    let hx = standard_operator(OperatorKind::PauliX, 2).unwrap() * Complex64::new(0.5, 0.0);
    let l = build_liouvillian(&hz, &[hx], None).unwrap();
    let model = BilinearModel::discretize_first_order(&l, 0.2).unwrap();
    let (n, m) = (model.state_dim(), model.num_controls());
    let h = 1e-5;
    (0..20).all(|_| {
        let x = RVec::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let u = RVec::from_fn(m, |_, _| rng.gen_range(-0.5..0.5));
        let x1 = model.step(&x, &u);
        let lin = linearize(&model, &[x.clone(), x1], &[u.clone()]).unwrap();
        let a_ok = (0..n).all(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let col = (model.step(&xp, &u) - model.step(&xm, &u)) / (2.0 * h);
            (lin.a_t[0].column(i) - &col).amax() <= 1e-6 * col.amax().max(1.0)
        });
        let b_ok = (0..m).all(|j| {
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            let col = (model.step(&x, &up) - model.step(&x, &um)) / (2.0 * h);
            (lin.b_t[0].column(j) - &col).amax() <= 1e-6 * col.amax().max(1.0)
        });
        a_ok && b_ok
    })
}

fn projected_gradient_box(p: &DMatrix<f64>, q: &RVec, lo: &RVec, hi: &RVec) -> RVec {
    let step = 1.0 / (p.norm() + 1.0);
    let mut z = RVec::zeros(q.len());
    for _ in 0..200_000 {
        let grad = p * &z + q;
        let mut next = &z - step * grad;
        for i in 0..q.len() {
            next[i] = next[i].clamp(lo[i], hi[i]);
        }
        let moved = (&next - &z).amax();
        z = next;
        if moved <= 1e-12 {
            break;
        }
    }
    z
}

fn qp_matches_oracle() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    (0..50).all(|_| {
        let n = rng.gen_range(2..=8);
        let half = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let p_dense = &half * half.transpose() + DMatrix::identity(n, n) * 0.1;
        let q = RVec::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let lo = RVec::from_fn(n, |_, _| rng.gen_range(-1.0..0.0));
        let hi = RVec::from_fn(n, |_, _| rng.gen_range(0.0..1.0));
        let triplets: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, p_dense[(i, j)]))
            .collect();
        let qp = QPProblem {
            p: CscMatrix::from_triplets(n, n, triplets),
            q: q.clone(),
            g: CscMatrix::identity(n),
            l: lo.clone(),
            u: hi.clone(),
        };
        let sol = match solve(&qp, &SolveOptions::default()) {
            Ok(s) if s.status == SolveStatus::Solved => s,
            _ => return false,
        };
        let oracle = projected_gradient_box(&p_dense, &q, &lo, &hi);
        let obj = |z: &RVec| 0.5 * (z.transpose() * &p_dense * z)[(0, 0)] + q.dot(z);
        obj(&sol.z) - obj(&oracle) <= 1e-5
    })
}

fn euler_first_order() -> bool {
    let hz = standard_operator(OperatorKind::PauliZ, 2).unwrap() * Complex64::new(-0.1, 0.0);
    let hx = standard_operator(OperatorKind::PauliX, 2).unwrap() * Complex64::new(0.5, 0.0);
    let plant = build_liouvillian(&hz, &[hx], None).unwrap();
    let endpoint_error = |dt: f64| -> f64 {
        let model = BilinearModel::discretize_first_order(&plant, dt).unwrap();
        let steps = (10.0 / dt).round() as usize;
        let mut x = QuantumState::basis_state(2, 0).to_real_vec();
        let mut truth = QuantumState::basis_state(2, 0);
        let u = DVector::from_element(1, 0.3);
        for _ in 0..steps {
            x = model.step(&x, &u);
            truth = step_truth(&plant, &truth, &u, dt).unwrap();
        }
        (x - truth.to_real_vec()).norm()
    };
    (1.7..=2.3).contains(&(endpoint_error(0.1) / endpoint_error(0.05)))
}
