//! Density matrices, fidelity, and the norm-fidelity identity.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg::{hermiticity_deviation, real_embed_vec, real_unembed_vec, vectorize};
use super::{devectorize, CMat, QcoreError, RVec, HERMITICITY_TOL, PSD_TOL, TRACE_TOL};

/// A density matrix: Hermitian, unit trace, positive semidefinite up to
/// numerical slack. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: CMat,
}

impl QuantumState {
    pub fn new(rho: CMat) -> Result<Self, QcoreError> {
        if !rho.is_square() {
            return Err(QcoreError::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QcoreError::NonFinite);
        }
        let dev = hermiticity_deviation(&rho);
        if dev > HERMITICITY_TOL {
            return Err(QcoreError::NotHermitian {
                tol: HERMITICITY_TOL,
                max_dev: dev,
            });
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(QcoreError::BadTrace {
                trace: trace.re,
                tol: TRACE_TOL,
            });
        }
        let min_eig = hermitian_eigenvalues(&rho)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(QcoreError::NotPsd {
                tol: PSD_TOL,
                min_eig,
            });
        }
        Ok(Self { rho })
    }

    /// Pure state `|j><j|` in an `n`-level system.
    pub fn basis_state(n: usize, j: usize) -> Self {
        let mut rho = DMatrix::zeros(n, n);
        rho[(j, j)] = Complex64::new(1.0, 0.0);
        Self { rho }
    }

    /// Pure state from a normalized complex amplitude vector.
    pub fn from_pure(psi: &super::CVec) -> Result<Self, QcoreError> {
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QcoreError::NonFinite);
        }
        let psi = psi / Complex64::new(norm, 0.0);
        Ok(Self {
            rho: &psi * psi.adjoint(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    /// The vectorized-real view of the state: `real_embed_vec(vec(rho))`,
    /// length `2N²`.
    pub fn to_real_vec(&self) -> RVec {
        real_embed_vec(&vectorize(&self.rho))
    }

    /// Rebuild a state from its vectorized-real view, re-Hermitizing and
    /// renormalizing the trace to absorb roundoff.
    pub fn from_real_vec(x: &RVec, n: usize) -> Result<Self, QcoreError> {
        let v = real_unembed_vec(x)?;
        let raw = devectorize(&v, n)?;
        let herm = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        let trace = herm.trace().re;
        if !trace.is_finite() || trace.abs() < 1e-12 {
            return Err(QcoreError::NonFinite);
        }
        Self::new(herm / Complex64::new(trace, 0.0))
    }

    /// True when the state is rank one within `tol` (largest eigenvalue
    /// within `tol` of 1).
    pub fn is_pure(&self, tol: f64) -> bool {
        let max_eig = hermitian_eigenvalues(&self.rho)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        (max_eig - 1.0).abs() <= tol
    }
}

fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Principal square root of a Hermitian PSD matrix via eigendecomposition,
/// clamping negative eigenvalues at zero.
fn sqrtm_psd(m: &CMat) -> Result<CMat, QcoreError> {
    let eig = m.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL {
        return Err(QcoreError::NotPsd {
            tol: PSD_TOL,
            min_eig,
        });
    }
    let mut d = CMat::zeros(m.nrows(), m.ncols());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        d[(k, k)] = Complex64::new(lam.max(0.0).sqrt(), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// State fidelity `F(rho, rho_ref) = Tr{sqrt(sqrt(rho) rho_ref sqrt(rho))}²`.
///
/// When the reference is pure this reduces to the overlap `Tr{rho rho_ref}`.
pub fn fidelity(rho: &QuantumState, rho_ref: &QuantumState) -> Result<f64, QcoreError> {
    if rho.dim() != rho_ref.dim() {
        return Err(QcoreError::DimensionMismatch(format!(
            "fidelity between dimensions {} and {}",
            rho.dim(),
            rho_ref.dim()
        )));
    }
    let f = if rho_ref.is_pure(1e-9) {
        (rho.rho() * rho_ref.rho()).trace().re
    } else if rho.is_pure(1e-9) {
        (rho_ref.rho() * rho.rho()).trace().re
    } else {
        let s = sqrtm_psd(rho.rho())?;
        let inner = &s * rho_ref.rho() * &s;
        let root = sqrtm_psd(&((&inner + inner.adjoint()) * Complex64::new(0.5, 0.0)))?;
        let t = root.trace().re;
        t * t
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Both sides of the pure-state identity
/// `½‖x - x_ref‖₂² = 1 - F(rho, rho_ref)`,
/// with `x` the vectorized-real state. Returned as `(lhs, rhs)` so tests can
/// assert their agreement.
pub fn state_norm_identity_check(
    rho: &QuantumState,
    rho_ref: &QuantumState,
) -> Result<(f64, f64), QcoreError> {
    let dx = rho.to_real_vec() - rho_ref.to_real_vec();
    let lhs = 0.5 * dx.norm_squared();
    let rhs = 1.0 - fidelity(rho, rho_ref)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn basis_state_is_valid() {
        let s = QuantumState::basis_state(3, 1);
        assert!(QuantumState::new(s.rho().clone()).is_ok());
        assert!(s.is_pure(1e-12));
    }

    #[test]
    fn rejects_bad_trace_and_non_hermitian() {
        let double = CMat::identity(2, 2) * Complex64::new(2.0, 0.0);
        assert!(matches!(
            QuantumState::new(double),
            Err(QcoreError::BadTrace { .. })
        ));
        let mut skew = CMat::identity(2, 2) * Complex64::new(0.5, 0.0);
        skew[(0, 1)] = Complex64::new(0.3, 0.0);
        assert!(matches!(
            QuantumState::new(skew),
            Err(QcoreError::NotHermitian { .. })
        ));
    }

    #[test]
    fn fidelity_of_state_with_itself_is_one() {
        let s = QuantumState::basis_state(2, 0);
        assert_abs_diff_eq!(fidelity(&s, &s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_of_orthogonal_states_is_zero() {
        let zero = QuantumState::basis_state(2, 0);
        let one = QuantumState::basis_state(2, 1);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_of_maximally_mixed_vs_pure_is_half() {
        let mixed =
            QuantumState::new(CMat::identity(2, 2) * Complex64::new(0.5, 0.0)).unwrap();
        let pure = QuantumState::basis_state(2, 0);
        assert_abs_diff_eq!(fidelity(&mixed, &pure).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn general_fidelity_matches_pure_overlap() {
        // Both routes agree when one state is pure: compare the generic
        // sqrt-based formula against the overlap on a mixed/pure pair.
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = Complex64::new(0.7, 0.0);
        rho[(1, 1)] = Complex64::new(0.3, 0.0);
        rho[(0, 1)] = Complex64::new(0.2, 0.1);
        rho[(1, 0)] = Complex64::new(0.2, -0.1);
        let mixed = QuantumState::new(rho).unwrap();
        let pure = QuantumState::basis_state(2, 1);
        let overlap = (mixed.rho() * pure.rho()).trace().re;
        assert_abs_diff_eq!(fidelity(&mixed, &pure).unwrap(), overlap, epsilon = 1e-10);
    }

    #[test]
    fn norm_identity_on_pure_pairs() {
        let zero = QuantumState::basis_state(2, 0);
        let one = QuantumState::basis_state(2, 1);
        let (lhs, rhs) = state_norm_identity_check(&zero, &zero).unwrap();
        assert_abs_diff_eq!(lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 0.0, epsilon = 1e-12);
        let (lhs, rhs) = state_norm_identity_check(&zero, &one).unwrap();
        assert_abs_diff_eq!(lhs, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn real_vec_roundtrip() {
        let psi = DVector::from_vec(vec![
            Complex64::new(0.6, 0.2),
            Complex64::new(-0.3, 0.7),
        ]);
        let s = QuantumState::from_pure(&psi).unwrap();
        let back = QuantumState::from_real_vec(&s.to_real_vec(), 2).unwrap();
        assert_abs_diff_eq!((s.rho() - back.rho()).norm(), 0.0, epsilon = 1e-12);
    }
}
