//! Compressed sparse column matrices, just enough for the QP solver.

use super::super::qcore::RVec;

/// Sparse matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CscMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if v != 0.0 {
                cols[c].push((r, v));
            }
        }
        let mut indptr = Vec::with_capacity(ncols + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for col in &mut cols {
            col.sort_by_key(|&(r, _)| r);
            let mut last: Option<usize> = None;
            for &(r, v) in col.iter() {
                if last == Some(r) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(r);
                    data.push(v);
                    last = Some(r);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Iterate the entries of column `j` as `(row, value)` pairs.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[j]..self.indptr[j + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.data[range].iter().copied())
    }

    /// Iterate all entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.column(j).map(move |(r, v)| (r, j, v)))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &RVec) -> RVec {
        assert_eq!(x.len(), self.ncols);
        let mut y = RVec::zeros(self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (r, v) in self.column(j) {
                y[r] += v * xj;
            }
        }
        y
    }

    /// `y = Aᵀ x`.
    pub fn mul_vec_transpose(&self, x: &RVec) -> RVec {
        assert_eq!(x.len(), self.nrows);
        let mut y = RVec::zeros(self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for (r, v) in self.column(j) {
                acc += v * x[r];
            }
            y[j] = acc;
        }
        y
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v)),
        )
    }

    /// Max absolute difference against another matrix with the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut dense: std::collections::HashMap<(usize, usize), f64> =
            self.triplets().map(|(r, c, v)| ((r, c), v)).collect();
        let mut max = 0.0f64;
        for (r, c, v) in other.triplets() {
            let d = dense.remove(&(r, c)).unwrap_or(0.0);
            max = max.max((d - v).abs());
        }
        for (_, v) in dense {
            max = max.max(v.abs());
        }
        max
    }
}
