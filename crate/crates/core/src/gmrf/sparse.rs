//! Compressed sparse storage: symmetric matrices (lower triangle, column
//! compressed) and general row-compressed matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric sparse matrix. Only the lower triangle is stored, column by
/// column; within each column row indices are strictly increasing and the
/// diagonal entry (always present) comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets. Entries from either triangle
    /// are folded into the lower triangle and duplicates are summed, so a
    /// caller may pass each off-diagonal pair once or both halves
    /// with half weights; it must not pass both halves with full weights.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::config(format!(
                    "triplet ({r}, {c}) out of range for dimension {dim}"
                )));
            }
            let (lo, hi) = if r >= c { (r, c) } else { (c, r) };
            cols[hi].push((lo, v));
        }
        Ok(Self::from_columns(dim, cols))
    }

    /// Builds from per-column lists of `(row, value)` with `row >= col`.
    /// Duplicates are summed; a diagonal slot is created if missing.
    pub(crate) fn from_columns(dim: usize, mut cols: Vec<Vec<(usize, f64)>>) -> Self {
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push((j, 0.0));
            col.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(r, v) in col.iter() {
                debug_assert!(r >= j);
                if r == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                    last = r;
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseSym {
            dim,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Diagonal matrix.
    pub fn diagonal(diag: &[f64]) -> Self {
        SparseSym {
            dim: diag.len(),
            col_ptr: (0..=diag.len()).collect(),
            row_idx: (0..diag.len()).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same sparsity structure, new values (length must match).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        SparseSym {
            dim: self.dim,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values,
        }
    }

    /// Number of stored (lower-triangle) entries.
    pub fn stored_nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Number of structural nonzeros of the full symmetric matrix.
    pub fn nnz(&self) -> usize {
        2 * self.row_idx.len() - self.dim
    }

    /// Iterates over stored entries as `(row, col, value)` with `row >= col`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| self.values[self.col_ptr[j]])
            .collect()
    }

    /// Entry lookup (either triangle).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = if r >= c { (r, c) } else { (c, r) };
        let range = self.col_ptr[hi]..self.col_ptr[hi + 1];
        match self.row_idx[range.clone()].binary_search(&lo) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for j in 0..self.dim {
            let p0 = self.col_ptr[j];
            y[j] += self.values[p0] * x[j];
            for p in p0 + 1..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        ax.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Entrywise linear combination `a·self + b·other` over the union pattern.
    pub fn add_scaled(&self, a: f64, other: &SparseSym, b: f64) -> Result<SparseSym> {
        if self.dim != other.dim {
            return Err(Error::config("dimension mismatch in sparse addition"));
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim];
        for (r, c, v) in self.iter() {
            cols[c].push((r, a * v));
        }
        for (r, c, v) in other.iter() {
            cols[c].push((r, b * v));
        }
        Ok(Self::from_columns(self.dim, cols))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    /// Builds from a dense symmetric matrix, keeping entries with
    /// `|a_ij| > drop_tol` (the diagonal is always kept).
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let n = m.nrows();
        let cols = (0..n)
            .map(|j| {
                (j..n)
                    .filter(|&i| i == j || m[(i, j)].abs() > drop_tol)
                    .map(|i| (i, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_columns(n, cols)
    }
}

/// General sparse matrix in compressed-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        CsrMatrix {
            ncols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(col, value)` pairs; duplicate columns are
    /// summed and explicit zeros dropped.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let mut e: Vec<(usize, f64)> = entries.to_vec();
        e.sort_unstable_by_key(|x| x.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(e.len());
        for (c, v) in e {
            assert!(c < self.ncols, "column {c} out of range {}", self.ncols);
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        for (c, v) in merged {
            if v != 0.0 {
                self.col_idx.push(c);
                self.values.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows())
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows());
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            for (c, v) in self.row(i) {
                out[c] += v * yi;
            }
        }
        out
    }

    /// `Aᵀ diag(w) A` as a symmetric sparse matrix.
    pub fn weighted_gram(&self, w: &[f64]) -> SparseSym {
        assert_eq!(w.len(), self.nrows());
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows() {
            let r: Vec<(usize, f64)> = self.row(i).collect();
            for &(a, va) in &r {
                for &(b, vb) in &r {
                    if a >= b {
                        cols[b].push((a, w[i] * va * vb));
                    }
                }
            }
        }
        SparseSym::from_columns(self.ncols, cols)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_fold_and_sum() {
        let a = SparseSym::from_triplets(
            3,
            &[
                (0, 0, 2.0),
                (0, 1, 1.0),
                (2, 1, 0.5),
                (1, 2, 0.5),
                (1, 1, 3.0),
            ],
        )
        .unwrap();
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(2, 1), 1.0);
        assert_eq!(a.get(2, 2), 0.0);
        assert_eq!(a.nnz(), 7);
        let y = a.mul_vec(&[1.0, 1.0, 1.0]);
        assert_eq!(y, vec![3.0, 5.0, 1.0]);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(SparseSym::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn weighted_gram_matches_dense() {
        let mut h = CsrMatrix::new(3);
        h.push_row(&[(0, 0.5), (2, 0.5)]);
        h.push_row(&[(1, 1.0)]);
        h.push_row(&[(0, 0.25), (1, 0.25), (2, 0.5)]);
        let w = [2.0, 3.0, 4.0];
        let g = h.weighted_gram(&w).to_dense();
        let hd = h.to_dense();
        let oracle =
            hd.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w)) * &hd;
        assert!((g - oracle).abs().max() < 1e-14);
    }
}
