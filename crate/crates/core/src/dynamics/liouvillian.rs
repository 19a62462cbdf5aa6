//! Liouvillian superoperators and the exact-exponential plant propagator.

use num_complex::Complex64;

use super::super::qcore::{
    devectorize, is_hermitian, real_embed, real_unembed_vec, CMat, QuantumState, RMat, RVec,
    HERMITICITY_TOL, PSD_TOL,
};
use super::expm::expm;
use super::DynamicsError;

/// Dissipator data for the master equation: a PSD coefficient matrix `C`
/// paired with trace-zero jump operators `{D_j}`.
#[derive(Debug, Clone)]
pub struct Dissipator {
    pub coeffs: CMat,
    pub ops: Vec<CMat>,
}

/// Continuous-time generator of the vectorized, real-embedded dynamics.
///
/// `drift` is the real `2N² × 2N²` matrix generated by `-i[H₀, ·]` plus the
/// dissipator; `controls[j]` is generated by `-i[H_j, ·]`. Units are rad/ns.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    h0: CMat,
    control_hamiltonians: Vec<CMat>,
    drift: RMat,
    controls: Vec<RMat>,
    dissipative: bool,
}

impl Liouvillian {
    /// Hilbert-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Real state dimension `2N²`.
    pub fn state_dim(&self) -> usize {
        2 * self.dim * self.dim
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn drift_generator(&self) -> &RMat {
        &self.drift
    }

    pub fn control_generators(&self) -> &[RMat] {
        &self.controls
    }

    pub fn is_dissipative(&self) -> bool {
        self.dissipative
    }

    /// The generator at a fixed control value, `L_drift + Σ u_j L_j`.
    pub fn generator_at(&self, u: &RVec) -> Result<RMat, DynamicsError> {
        if u.len() != self.controls.len() {
            return Err(DynamicsError::DimensionMismatch(format!(
                "{} control amplitudes supplied for {} control generators",
                u.len(),
                self.controls.len()
            )));
        }
        let mut gen = self.drift.clone();
        for (uj, nj) in u.iter().zip(&self.controls) {
            gen += nj * *uj;
        }
        Ok(gen)
    }

    /// Lift a closed-system Liouvillian to the vectorized-process space:
    /// the process state `P = |U>><<U|` evolves under `Ṗ = -i[H ⊗ 1, P]`,
    /// so the lifted system is a Liouvillian of dimension `N²` with every
    /// Hamiltonian replaced by `H ⊗ 1`.
    pub fn lift_to_process(&self) -> Result<Liouvillian, DynamicsError> {
        if self.dissipative {
            return Err(DynamicsError::DissipativeSystem);
        }
        let id = CMat::identity(self.dim, self.dim);
        let h0 = self.h0.kronecker(&id);
        let hs: Vec<CMat> = self
            .control_hamiltonians
            .iter()
            .map(|h| h.kronecker(&id))
            .collect();
        build_liouvillian(&h0, &hs, None)
    }
}

/// Complex superoperator of the commutator `-i[H, ·]` under row-major
/// vectorization: `vec(Hρ - ρH) = (H ⊗ I - I ⊗ Hᵀ) vec(ρ)`.
fn hamiltonian_superop(h: &CMat) -> CMat {
    let n = h.nrows();
    let id = CMat::identity(n, n);
    let minus_i = Complex64::new(0.0, -1.0);
    (h.kronecker(&id) - id.kronecker(&h.transpose())) * minus_i
}

/// Superoperator of the dissipator
/// `½ Σ c_jk ([D_j, ρ D_k†] + [D_j ρ, D_k†])
///  = Σ c_jk (D_j ρ D_k† - ½ {D_k† D_j, ρ})`.
fn dissipator_superop(dim: usize, diss: &Dissipator) -> CMat {
    let n2 = dim * dim;
    let id = CMat::identity(dim, dim);
    let mut sup = CMat::zeros(n2, n2);
    let half = Complex64::new(0.5, 0.0);
    for (j, dj) in diss.ops.iter().enumerate() {
        for (k, dk) in diss.ops.iter().enumerate() {
            let c = diss.coeffs[(j, k)];
            if c.norm() == 0.0 {
                continue;
            }
            let dkdag_dj = dk.adjoint() * dj;
            // vec(D_j ρ D_k†) =D_j ⊗ (D_k†)ᵀ vec(ρ) = D_j ⊗ conj(D_k) vec(ρ)
            let sandwich = dj.kronecker(&dk.conjugate());
            let left = dkdag_dj.kronecker(&id);
            let right = id.kronecker(&dkdag_dj.transpose());
            sup += (sandwich - (left + right) * half) * c;
        }
    }
    sup
}

/// Assemble the Liouvillian for Hamiltonians `H₀, {H_j}` and an optional
/// dissipator, already vectorized (row-major) and real-embedded.
pub fn build_liouvillian(
    h0: &CMat,
    control_hamiltonians: &[CMat],
    dissipator: Option<&Dissipator>,
) -> Result<Liouvillian, DynamicsError> {
    let dim = h0.nrows();
    if !h0.is_square() {
        return Err(DynamicsError::DimensionMismatch(
            "drift Hamiltonian must be square".into(),
        ));
    }
    for h in std::iter::once(h0).chain(control_hamiltonians) {
        if h.nrows() != dim || h.ncols() != dim {
            return Err(DynamicsError::DimensionMismatch(format!(
                "all Hamiltonians must be {dim}x{dim}"
            )));
        }
        if !is_hermitian(h, HERMITICITY_TOL) {
            let dev = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            return Err(DynamicsError::NonHermitianHamiltonian(dev));
        }
    }

    let mut drift_c = hamiltonian_superop(h0);
    let mut dissipative = false;
    if let Some(diss) = dissipator {
        for op in &diss.ops {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(DynamicsError::DimensionMismatch(
                    "dissipator operators must match the Hamiltonian dimension".into(),
                ));
            }
        }
        if diss.coeffs.nrows() != diss.ops.len() || diss.coeffs.ncols() != diss.ops.len() {
            return Err(DynamicsError::DimensionMismatch(
                "dissipator coefficient matrix must be square with one row per operator".into(),
            ));
        }
        let min_eig = diss
            .coeffs
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(DynamicsError::NonPsdDissipator(min_eig));
        }
        let sup = dissipator_superop(dim, diss);
        if sup.iter().any(|z| z.norm() > 0.0) {
            dissipative = true;
        }
        drift_c += sup;
    }

    let controls = control_hamiltonians
        .iter()
        .map(|h| real_embed(&hamiltonian_superop(h)))
        .collect();

    Ok(Liouvillian {
        dim,
        h0: h0.clone(),
        control_hamiltonians: control_hamiltonians.to_vec(),
        drift: real_embed(&drift_c),
        controls,
        dissipative,
    })
}

/// Propagate the plant state one step of length `dt` under piecewise-constant
/// control `u`, using the exact exponential of the generator.
///
/// Substeps are subdivided until the raw trace drift is below `1e-10`; the
/// output is re-Hermitized and trace-renormalized to absorb roundoff.
pub fn step_truth(
    plant: &Liouvillian,
    rho: &QuantumState,
    u: &RVec,
    dt: f64,
) -> Result<QuantumState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::BadTimestep(dt));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::DimensionMismatch(
            "control amplitudes must be finite".into(),
        ));
    }
    if rho.dim() != plant.dim {
        return Err(DynamicsError::DimensionMismatch(format!(
            "state dimension {} does not match plant dimension {}",
            rho.dim(),
            plant.dim
        )));
    }
    let gen = plant.generator_at(u)?;
    let x0 = rho.to_real_vec();

    let mut substeps = 1usize;
    loop {
        let e = expm(&(&gen * (dt / substeps as f64)));
        let mut x = x0.clone();
        for _ in 0..substeps {
            x = &e * x;
        }
        let raw = devectorize(&real_unembed_vec(&x)?, plant.dim)?;
        let drift = (raw.trace().re - 1.0).abs();
        if drift < 1e-10 || substeps >= 1024 {
            return Ok(QuantumState::from_real_vec(&x, plant.dim)?);
        }
        substeps *= 2;
    }
}
