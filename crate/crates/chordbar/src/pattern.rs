//! Lower-triangular sparsity patterns and symmetric matrices stored on them.
//!
//! A pattern is identified with the positions of the lower triangle of a
//! symmetric matrix. Every column stores its row indices in increasing order
//! and always contains the diagonal, so the diagonal entry of column `j` sits
//! at the first stored position of that column.

use std::sync::Arc;

use crate::dense::DenseMat;
use crate::error::StructureError;

/// Sparsity pattern of the lower triangle of an order-`n` symmetric matrix,
/// in compressed-column form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from raw compressed-column data and validates it:
    /// indices in range, rows strictly increasing per column, diagonal
    /// present as the first entry of each column.
    pub fn from_parts(n: usize, colptr: Vec<usize>, rowidx: Vec<usize>) -> Result<Self, StructureError> {
        if colptr.len() != n + 1 || colptr[0] != 0 || colptr[n] != rowidx.len() {
            return Err(StructureError::Mismatch("column pointer array"));
        }
        for j in 0..n {
            let (lo, hi) = (colptr[j], colptr[j + 1]);
            if lo > hi {
                return Err(StructureError::Mismatch("column pointer array"));
            }
            if lo == hi || rowidx[lo] != j {
                return Err(StructureError::MissingDiagonal { col: j });
            }
            for k in lo..hi {
                let i = rowidx[k];
                if i >= n || i < j {
                    return Err(StructureError::InvalidIndex { row: i, col: j, n });
                }
                if k > lo {
                    if rowidx[k] == rowidx[k - 1] {
                        return Err(StructureError::DuplicateEntry { row: i, col: j });
                    }
                    if rowidx[k] < rowidx[k - 1] {
                        return Err(StructureError::UnsortedColumn { col: j });
                    }
                }
            }
        }
        Ok(SparsityPattern { n, colptr, rowidx })
    }

    /// Builds a pattern from a list of lower-triangle entries `(row, col)`
    /// with `row >= col`. Duplicates are merged and diagonal entries are
    /// added automatically.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, StructureError> {
        let mut cols: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        for (i, j) in entries {
            if i >= n || j >= n || i < j {
                return Err(StructureError::InvalidIndex { row: i, col: j, n });
            }
            if i != j {
                cols[j].push(i);
            }
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::new();
        colptr.push(0);
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            rowidx.extend_from_slice(col);
            colptr.push(rowidx.len());
        }
        Ok(SparsityPattern { n, colptr, rowidx })
    }

    /// Dense lower-triangle pattern of order `n`.
    pub fn dense(n: usize) -> Self {
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::new();
        colptr.push(0);
        for j in 0..n {
            rowidx.extend(j..n);
            colptr.push(rowidx.len());
        }
        SparsityPattern { n, colptr, rowidx }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Number of stored lower-triangle entries, diagonal included.
    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Row indices of column `j`, diagonal first.
    pub fn col(&self, j: usize) -> &[usize] {
        &self.rowidx[self.colptr[j]..self.colptr[j + 1]]
    }

    /// Strictly-below-diagonal row indices of column `j`.
    pub fn below_diag(&self, j: usize) -> &[usize] {
        &self.rowidx[self.colptr[j] + 1..self.colptr[j + 1]]
    }

    /// Storage range of column `j` inside the value array.
    pub fn col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.colptr[j]..self.colptr[j + 1]
    }

    /// Storage index of entry `(i, j)` with `i >= j`, if present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.colptr[j];
        let hi = self.colptr[j + 1];
        self.rowidx[lo..hi].binary_search(&i).ok().map(|k| lo + k)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.position(i, j).is_some()
    }

    /// Iterates over all stored entries as `(row, col, storage index)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n).flat_map(move |j| self.col_range(j).map(move |p| (self.rowidx[p], j, p)))
    }
}

/// Symmetric matrix with values stored on a shared [`SparsityPattern`].
///
/// Entry `(i, j)` of the lower triangle is stored once; the upper triangle is
/// implied by symmetry.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        SparseSymMatrix { pattern, values: vec![0.0; nnz] }
    }

    pub fn from_values(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self, StructureError> {
        if values.len() != pattern.nnz() {
            return Err(StructureError::Mismatch("value array length"));
        }
        Ok(SparseSymMatrix { pattern, values })
    }

    /// Identity matrix on the given pattern.
    pub fn identity(pattern: Arc<SparsityPattern>) -> Self {
        let mut x = SparseSymMatrix::zeros(pattern);
        for j in 0..x.order() {
            let p = x.pattern.col_range(j).start;
            x.values[p] = 1.0;
        }
        x
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn order(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Values of column `j`, aligned with `pattern().col(j)`.
    pub fn col_values(&self, j: usize) -> &[f64] {
        &self.values[self.pattern.col_range(j)]
    }

    pub fn col_values_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.pattern.col_range(j);
        &mut self.values[r]
    }

    /// Value at `(i, j)`; zero if the position is not stored. Symmetric
    /// access: `i < j` reads the mirrored entry.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Sets the stored entry `(i, j)` with `i >= j`; panics if absent.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pattern.position(i, j).expect("entry not in pattern");
        self.values[p] = v;
    }

    /// Trace inner product `tr(A B)` evaluated from lower-triangle storage:
    /// diagonal entries count once, off-diagonal entries twice.
    pub fn inner(&self, other: &SparseSymMatrix) -> f64 {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "inner product needs matching patterns"
        );
        let mut diag = 0.0;
        let mut off = 0.0;
        for j in 0..self.order() {
            let r = self.pattern.col_range(j);
            diag += self.values[r.start] * other.values[r.start];
            for p in r.start + 1..r.end {
                off += self.values[p] * other.values[p];
            }
        }
        diag + 2.0 * off
    }

    /// Frobenius norm of the full symmetric matrix.
    pub fn fro_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Full dense copy of the symmetric matrix.
    pub fn to_dense(&self) -> DenseMat {
        let n = self.order();
        let mut a = DenseMat::zeros(n, n);
        for (i, j, p) in self.pattern.entries() {
            a[(i, j)] = self.values[p];
            a[(j, i)] = self.values[p];
        }
        a
    }
}
