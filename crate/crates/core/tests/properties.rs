//! Randomized property suites over the library's algebraic identities and
//! solver guarantees. Every suite draws from a fixed-seed generator so runs
//! are reproducible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmpc::dynamics::{build_liouvillian, linearize, step_truth, BilinearModel};
use qmpc::qcore::{
    fidelity, real_embed, standard_operator, state_norm_identity_check, vectorize, CMat, CVec,
    OperatorKind, QuantumState, RVec,
};
use qmpc::qpsolver::{solve, CscMatrix, QPProblem, SolveOptions, SolveStatus};

fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn random_pure(rng: &mut ChaCha8Rng, n: usize) -> QuantumState {
    let psi = CVec::from_fn(n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let psi = &psi / Complex64::new(psi.norm(), 0.0);
    QuantumState::from_pure(&psi).unwrap()
}

#[test]
fn vectorization_multiplication_law_on_random_triples() {
    // vec(ABC) = (A ⊗ Cᵀ) vec(B) under row-major stacking.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let a = random_cmat(&mut rng, 3, 3);
        let b = random_cmat(&mut rng, 3, 3);
        let c = random_cmat(&mut rng, 3, 3);
        let lhs = vectorize(&(&a * &b * &c));
        let rhs = a.kronecker(&c.transpose()) * vectorize(&b);
        assert!((lhs - rhs).norm() <= 1e-12, "multiplication law violated");
    }
}

#[test]
fn real_embedding_is_an_algebra_homomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let m = random_cmat(&mut rng, 2, 2);
        let n = random_cmat(&mut rng, 2, 2);
        let prod = (real_embed(&m) * real_embed(&n) - real_embed(&(&m * &n))).norm();
        let sum = (real_embed(&m) + real_embed(&n) - real_embed(&(&m + &n))).norm();
        let dagger = (real_embed(&m).transpose() - real_embed(&m.adjoint())).norm();
        assert!(prod <= 1e-12 && sum <= 1e-12 && dagger <= 1e-12);
    }
}

#[test]
fn plant_preserves_trace_and_hermiticity_over_a_thousand_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let hz = standard_operator(OperatorKind::PauliZ, 2).unwrap() * Complex64::new(-0.1, 0.0);
    let hx = standard_operator(OperatorKind::PauliX, 2).unwrap() * Complex64::new(0.5, 0.0);
    let plant = build_liouvillian(&hz, &[hx], None).unwrap();
    let mut state = QuantumState::basis_state(2, 0);
    for _ in 0..1000 {
        let u = DVector::from_element(1, rng.gen_range(-0.6..0.6));
        state = step_truth(&plant, &state, &u, 0.2).unwrap();
        let rho = state.rho();
        let trace_drift = (rho.trace().re - 1.0).abs().max(rho.trace().im.abs());
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(trace_drift <= 1e-10, "trace drift {trace_drift}");
        assert!(herm <= 1e-10, "Hermiticity drift {herm}");
    }
}

#[test]
fn norm_identity_on_random_pure_pairs() {
    // ½‖x − x_ref‖² = 1 − F(ρ, ρ_ref) for pure states.
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let a = random_pure(&mut rng, 3);
        let b = random_pure(&mut rng, 3);
        let (lhs, rhs) = state_norm_identity_check(&a, &b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9, "identity gap {}", (lhs - rhs).abs());
        let f = fidelity(&a, &b).unwrap();
        assert!((rhs - (1.0 - f)).abs() <= 1e-9);
    }
}

#[test]
fn linearization_matches_central_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let hz = standard_operator(OperatorKind::PauliZ, 2).unwrap() * Complex64::new(0.3, 0.0);
    let hx = standard_operator(OperatorKind::PauliX, 2).unwrap() * Complex64::new(0.5, 0.0);
    let hy = standard_operator(OperatorKind::PauliY, 2).unwrap() * Complex64::new(0.5, 0.0);
    let l = build_liouvillian(&hz, &[hx, hy], None).unwrap();
    let model = BilinearModel::discretize_first_order(&l, 0.2).unwrap();
    let n = model.state_dim();
    let m = model.num_controls();
    for _ in 0..20 {
        let x = RVec::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let u = RVec::from_fn(m, |_, _| rng.gen_range(-0.5..0.5));
        let x1 = model.step(&x, &u);
        let lin = linearize(&model, &[x.clone(), x1], &[u.clone()]).unwrap();
        let h = 1e-5;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let col = (model.step(&xp, &u) - model.step(&xm, &u)) / (2.0 * h);
            let err = (lin.a_t[0].column(i) - &col).amax();
            assert!(err <= 1e-6 * col.amax().max(1.0), "A column {i} off by {err}");
        }
        for j in 0..m {
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            let col = (model.step(&x, &up) - model.step(&x, &um)) / (2.0 * h);
            let err = (lin.b_t[0].column(j) - &col).amax();
            assert!(err <= 1e-6 * col.amax().max(1.0), "B column {j} off by {err}");
        }
    }
}

/// Projected gradient descent on `½zᵀPz + qᵀz` over a box, run to a tight
/// fixed-point tolerance. Slow but independent of the ADMM code paths.
fn projected_gradient_box(
    p: &DMatrix<f64>,
    q: &RVec,
    lo: &RVec,
    hi: &RVec,
) -> RVec {
    let n = q.len();
    let step = 1.0 / (p.norm() + 1.0);
    let mut z = RVec::zeros(n);
    for _ in 0..200_000 {
        let grad = p * &z + q;
        let mut next = &z - step * grad;
        for i in 0..n {
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

#[test]
fn admm_matches_projected_gradient_on_random_box_qps() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for case in 0..50 {
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
        let sol = solve(&qp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved, "case {case} not solved");
        let oracle_z = projected_gradient_box(&p_dense, &q, &lo, &hi);
        let obj = |z: &RVec| 0.5 * (z.transpose() * &p_dense * z)[(0, 0)] + q.dot(z);
        let gap = obj(&sol.z) - obj(&oracle_z);
        assert!(gap <= 1e-5, "case {case}: objective gap {gap}");
        for i in 0..n {
            assert!(
                sol.z[i] >= lo[i] - 5e-6 && sol.z[i] <= hi[i] + 5e-6,
                "case {case} coord {i}: z {} bounds [{}, {}]",
                sol.z[i], lo[i], hi[i]
            );
        }
    }
}

#[test]
fn euler_endpoint_error_halves_with_the_step() {
    // First-order global error on the §-style qubit task: halving dt should
    // roughly halve the endpoint error against the exact plant.
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
    let ratio = endpoint_error(0.1) / endpoint_error(0.05);
    assert!((1.7..=2.3).contains(&ratio), "convergence ratio {ratio}");
}
