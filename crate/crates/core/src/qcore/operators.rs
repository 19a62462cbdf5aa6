//! Standard operators: Pauli matrices, truncated ladder operators, projectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CMat, QcoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    PauliX,
    PauliY,
    PauliZ,
    /// Truncated lowering operator `a` with `a[j-1, j] = sqrt(j)`.
    Lower,
    /// Truncated raising operator `a†`.
    Raise,
    /// Rank-one projector `|j><k|`.
    Projector(usize, usize),
    Identity,
}

pub fn standard_operator(kind: OperatorKind, dim: usize) -> Result<CMat, QcoreError> {
    if dim < 2 {
        return Err(QcoreError::DimensionMismatch(format!(
            "operator dimension must be at least 2, got {dim}"
        )));
    }
    let c = Complex64::new;
    let mut m = DMatrix::zeros(dim, dim);
    match kind {
        OperatorKind::PauliX => {
            if dim != 2 {
                return Err(QcoreError::DimensionMismatch(
                    "Pauli operators are 2x2".into(),
                ));
            }
            m[(0, 1)] = c(1.0, 0.0);
            m[(1, 0)] = c(1.0, 0.0);
        }
        OperatorKind::PauliY => {
            if dim != 2 {
                return Err(QcoreError::DimensionMismatch(
                    "Pauli operators are 2x2".into(),
                ));
            }
            m[(0, 1)] = c(0.0, -1.0);
            m[(1, 0)] = c(0.0, 1.0);
        }
        OperatorKind::PauliZ => {
            if dim != 2 {
                return Err(QcoreError::DimensionMismatch(
                    "Pauli operators are 2x2".into(),
                ));
            }
            m[(0, 0)] = c(1.0, 0.0);
            m[(1, 1)] = c(-1.0, 0.0);
        }
        OperatorKind::Lower => {
            for j in 1..dim {
                m[(j - 1, j)] = c((j as f64).sqrt(), 0.0);
            }
        }
        OperatorKind::Raise => {
            for j in 1..dim {
                m[(j, j - 1)] = c((j as f64).sqrt(), 0.0);
            }
        }
        OperatorKind::Projector(j, k) => {
            if j >= dim || k >= dim {
                return Err(QcoreError::DimensionMismatch(format!(
                    "projector |{j}><{k}| does not fit in dimension {dim}"
                )));
            }
            m[(j, k)] = c(1.0, 0.0);
        }
        OperatorKind::Identity => {
            m = DMatrix::identity(dim, dim);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pauli_x_matches_convention() {
        let sx = standard_operator(OperatorKind::PauliX, 2).unwrap();
        assert_eq!(sx[(0, 1)].re, 1.0);
        assert_eq!(sx[(1, 0)].re, 1.0);
        assert_eq!(sx[(0, 0)].norm(), 0.0);
    }

    #[test]
    fn lowering_operator_truncated_to_three_levels() {
        let a = standard_operator(OperatorKind::Lower, 3).unwrap();
        assert_abs_diff_eq!(a[(0, 1)].re, 1.0);
        assert_abs_diff_eq!(a[(1, 2)].re, 2f64.sqrt());
        assert_eq!(a[(2, 1)].norm(), 0.0);
    }

    #[test]
    fn qubit_block_of_transmon_drive_is_sigma_x_halved() {
        // (a + a†)/2 restricted to the top-left 2x2 block equals σ_x / 2.
        let a = standard_operator(OperatorKind::Lower, 3).unwrap();
        let drive = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let sx = standard_operator(OperatorKind::PauliX, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!((drive[(i, j)] - sx[(i, j)] * 0.5).norm(), 0.0);
            }
        }
    }

    #[test]
    fn unknown_projector_rejected() {
        assert!(standard_operator(OperatorKind::Projector(2, 0), 2).is_err());
    }
}
