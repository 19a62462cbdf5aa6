//! Sparse LDLᵀ factorization for quasi-definite matrices, no pivoting.
//!
//! Up-looking column factorization over the elimination tree, operating on
//! the upper triangle (diagonal included) of a symmetric matrix. Since the
//! KKT systems handled here are symmetric quasi-definite, the factorization
//! exists for the natural ordering and no pivoting is required.

use super::sparse::CscMatrix;
use super::QpError;

#[derive(Debug, Clone)]
pub struct LdltFactor {
    n: usize,
    l_indptr: Vec<usize>,
    l_indices: Vec<usize>,
    l_data: Vec<f64>,
    d: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl LdltFactor {
    /// Factor the symmetric matrix whose UPPER triangle (with diagonal) is
    /// given in CSC form.
    pub fn new(upper: &CscMatrix) -> Result<Self, QpError> {
        let n = upper.ncols();
        if upper.nrows() != n {
            return Err(QpError::BadProblem("KKT matrix must be square".into()));
        }

        // Symbolic pass: elimination tree and column counts of L.
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut l_nz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (i, _) in upper.column(k) {
                if i > k {
                    return Err(QpError::BadProblem(
                        "matrix entries below the diagonal in upper-triangular input".into(),
                    ));
                }
                let mut i = i;
                while i < k && flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    l_nz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }

        let mut l_indptr = vec![0usize; n + 1];
        for k in 0..n {
            l_indptr[k + 1] = l_indptr[k] + l_nz[k];
        }
        let nnz = l_indptr[n];
        let mut l_indices = vec![0usize; nnz];
        let mut l_data = vec![0.0f64; nnz];
        let mut d = vec![0.0f64; n];

        // Numeric pass.
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut next = vec![0usize; n]; // fill position per column of L
        let mut flag = vec![NONE; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            y[k] = 0.0;
            for (i, v) in upper.column(k) {
                if i > k {
                    continue;
                }
                y[i] += v;
                let mut len = 0usize;
                let mut i = i;
                while i < k && flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for s in top..n {
                let i = pattern[s];
                let yi = y[i];
                y[i] = 0.0;
                for p in l_indptr[i]..(l_indptr[i] + next[i]) {
                    y[l_indices[p]] -= l_data[p] * yi;
                }
                let lki = yi / d[i];
                d[k] -= lki * yi;
                let p = l_indptr[i] + next[i];
                l_indices[p] = k;
                l_data[p] = lki;
                next[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(QpError::BadProblem(format!(
                    "zero pivot at column {k}; matrix is not quasi-definite"
                )));
            }
        }

        Ok(Self {
            n,
            l_indptr,
            l_indices,
            l_data,
            d,
        })
    }

    /// Solve `(L + I) D (L + I)ᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for j in 0..self.n {
            let bj = b[j];
            if bj != 0.0 {
                for p in self.l_indptr[j]..self.l_indptr[j + 1] {
                    b[self.l_indices[p]] -= self.l_data[p] * bj;
                }
            }
        }
        for j in 0..self.n {
            b[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut acc = b[j];
            for p in self.l_indptr[j]..self.l_indptr[j + 1] {
                acc -= self.l_data[p] * b[self.l_indices[p]];
            }
            b[j] = acc;
        }
    }
}
