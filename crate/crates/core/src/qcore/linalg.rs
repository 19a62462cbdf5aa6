//! Vectorization, the real embedding of complex matrices, and partial traces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{CMat, CVec, QcoreError, RMat, RVec};

/// Row-major vectorization: rows of `m` are concatenated into a column vector.
pub fn vectorize(m: &CMat) -> CVec {
    let (rows, cols) = m.shape();
    DVector::from_fn(rows * cols, |k, _| m[(k / cols, k % cols)])
}

/// Inverse of [`vectorize`] for an `n × n` matrix.
pub fn devectorize(v: &CVec, n: usize) -> Result<CMat, QcoreError> {
    if v.len() != n * n {
        return Err(QcoreError::DimensionMismatch(format!(
            "vector of length {} cannot devectorize to {n}x{n}",
            v.len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| v[i * n + j]))
}

/// Max-entry Hermiticity deviation check: `max |M - M†| <= tol`.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    hermiticity_deviation(m) <= tol
}

pub(crate) fn hermiticity_deviation(m: &CMat) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let mut max_dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
            max_dev = max_dev.max(dev);
        }
    }
    max_dev
}

/// Real embedding of a complex matrix: each entry `a + bi` becomes the
/// 2×2 block `[[a, -b], [b, a]]`, giving a `2m × 2n` real matrix.
///
/// The embedding is a ring homomorphism, so products of complex matrices
/// map to products of their embeddings.
pub fn real_embed(m: &CMat) -> RMat {
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(2 * rows, 2 * cols);
    for i in 0..rows {
        for j in 0..cols {
            let z = m[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// Real embedding of a complex vector: entry `a + bi` becomes the pair
/// `(a, b)`, so that `real_embed(M) · real_embed_vec(v) = real_embed_vec(M v)`.
pub fn real_embed_vec(v: &CVec) -> RVec {
    let mut out = DVector::zeros(2 * v.len());
    for (k, z) in v.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
    out
}

/// Inverse of [`real_embed_vec`].
pub fn real_unembed_vec(v: &RVec) -> Result<CVec, QcoreError> {
    if v.len() % 2 != 0 {
        return Err(QcoreError::DimensionMismatch(format!(
            "real vector of odd length {} has no complex preimage",
            v.len()
        )));
    }
    Ok(DVector::from_fn(v.len() / 2, |k, _| {
        Complex64::new(v[2 * k], v[2 * k + 1])
    }))
}

/// Which factor of a bipartite system survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of `rho_ab` over the complementary factor of a
/// `(d_a · d_b)`-dimensional bipartite system.
pub fn partial_trace(
    rho_ab: &CMat,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<CMat, QcoreError> {
    let (da, db) = dims;
    let n = da * db;
    if rho_ab.nrows() != n || rho_ab.ncols() != n {
        return Err(QcoreError::DimensionMismatch(format!(
            "partial trace expects a {n}x{n} matrix for dims ({da}, {db}), got {}x{}",
            rho_ab.nrows(),
            rho_ab.ncols()
        )));
    }
    // Joint index (i, j) with i = a*db + b.
    match keep {
        Subsystem::A => {
            let mut out = DMatrix::zeros(da, da);
            for a1 in 0..da {
                for a2 in 0..da {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..db {
                        acc += rho_ab[(a1 * db + b, a2 * db + b)];
                    }
                    out[(a1, a2)] = acc;
                }
            }
            Ok(out)
        }
        Subsystem::B => {
            let mut out = DMatrix::zeros(db, db);
            for b1 in 0..db {
                for b2 in 0..db {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..da {
                        acc += rho_ab[(a * db + b1, a * db + b2)];
                    }
                    out[(b1, b2)] = acc;
                }
            }
            Ok(out)
        }
    }
}
