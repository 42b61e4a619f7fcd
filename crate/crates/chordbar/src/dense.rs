//! Small dense matrices and the kernels the frontal recursions are built on:
//! symmetric LDL factorization, triangular solves, and orthogonal
//! re-triangularization after row deletion.

use std::ops::{Index, IndexMut};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Largest absolute diagonal entry of a square matrix.
    pub fn max_abs_diag(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        (0..self.rows).fold(0.0, |m, i| m.max(self[(i, i)].abs()))
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn diff_norm(&self, other: &DenseMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Copies the upper triangle onto the lower to restore exact symmetry.
    pub fn symmetrize_from_lower(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let v = self[(j, i)];
                self[(i, j)] = v;
            }
        }
    }

    /// In-place LDL factorization of a symmetric matrix; only the lower
    /// triangle is referenced. On success the strict lower triangle holds
    /// the unit factor and the diagonal holds `D`. Fails with the offending
    /// column when a pivot is `<= pivot_tol`.
    pub fn ldl_in_place(&mut self, pivot_tol: f64) -> Result<(), usize> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut col = vec![0.0; n];
        for j in 0..n {
            let d = self[(j, j)];
            if !(d > pivot_tol) {
                return Err(j);
            }
            for i in j + 1..n {
                col[i] = self[(i, j)];
                self[(i, j)] = col[i] / d;
            }
            for i in j + 1..n {
                let w = self.data[i * n + j];
                let row_i = &mut self.data[i * n + j + 1..i * n + i + 1];
                for (rik, &ck) in row_i.iter_mut().zip(&col[j + 1..=i]) {
                    *rik -= w * ck;
                }
            }
        }
        Ok(())
    }

    /// Solves `L D L^T x = b` in place, with `self` holding an LDL
    /// factorization produced by [`ldl_in_place`](Self::ldl_in_place).
    pub fn ldl_solve_in_place(&self, x: &mut [f64]) {
        let n = self.rows;
        assert_eq!(x.len(), n);
        for i in 1..n {
            let s = dot(&self.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self[(i, i)];
        }
        for j in (1..n).rev() {
            let xj = x[j];
            let row = self.row(j);
            for i in 0..j {
                x[i] -= row[i] * xj;
            }
        }
    }

    /// Upper-triangular factor `U` with `U U^T = self`, computed from the
    /// bottom-right corner. Only the lower triangle of `self` is read.
    /// Fails with the offending column when a pivot is `<= pivot_tol`.
    pub fn factor_upper_ut(&self, pivot_tol: f64) -> Result<DenseMat, usize> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut u = DenseMat::zeros(n, n);
        for j in (0..n).rev() {
            let mut s = self[(j, j)];
            {
                let rj = &u.data[j * n + j + 1..(j + 1) * n];
                s -= dot(rj, rj);
            }
            if !(s > pivot_tol) {
                return Err(j);
            }
            let ujj = s.sqrt();
            u.data[j * n + j] = ujj;
            for i in 0..j {
                // lower-triangle read: self[(j, i)] mirrors (i, j)
                let v = {
                    let ri = &u.data[i * n + j + 1..i * n + n];
                    let rj = &u.data[j * n + j + 1..(j + 1) * n];
                    self[(j, i)] - dot(ri, rj)
                };
                u.data[i * n + j] = v / ujj;
            }
        }
        Ok(u)
    }

    /// Solves `R x = b` in place for upper-triangular `R = self`.
    pub fn upper_solve_in_place(&self, x: &mut [f64]) {
        let n = self.rows;
        assert_eq!(x.len(), n);
        for i in (0..n).rev() {
            let row = self.row(i);
            let mut s = x[i];
            for k in i + 1..n {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
    }

    /// Solves `R^T x = b` in place for upper-triangular `R = self`.
    pub fn upper_transpose_solve_in_place(&self, x: &mut [f64]) {
        let n = self.rows;
        assert_eq!(x.len(), n);
        for k in 0..n {
            let row = self.row(k);
            let xk = x[k] / row[k];
            x[k] = xk;
            for i in k + 1..n {
                x[i] -= row[i] * xk;
            }
        }
    }
}

impl Index<(usize, usize)> for DenseMat {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// `c = beta*c + alpha * a b` (no transposes).
pub fn gemm_nn(alpha: f64, a: &DenseMat, b: &DenseMat, beta: f64, c: &mut DenseMat) {
    assert_eq!(a.cols, b.rows);
    assert_eq!((c.rows, c.cols), (a.rows, b.cols));
    if beta != 1.0 {
        c.data.iter_mut().for_each(|v| *v *= beta);
    }
    for i in 0..a.rows {
        for k in 0..a.cols {
            let w = alpha * a[(i, k)];
            if w == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let crow = c.row_mut(i);
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += w * bv;
            }
        }
    }
}

/// `c = beta*c + alpha * a^T b`.
pub fn gemm_tn(alpha: f64, a: &DenseMat, b: &DenseMat, beta: f64, c: &mut DenseMat) {
    assert_eq!(a.rows, b.rows);
    assert_eq!((c.rows, c.cols), (a.cols, b.cols));
    if beta != 1.0 {
        c.data.iter_mut().for_each(|v| *v *= beta);
    }
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for i in 0..a.cols {
            let w = alpha * arow[i];
            if w == 0.0 {
                continue;
            }
            let crow = c.row_mut(i);
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += w * bv;
            }
        }
    }
}

/// `c = beta*c + alpha * a b^T`.
pub fn gemm_nt(alpha: f64, a: &DenseMat, b: &DenseMat, beta: f64, c: &mut DenseMat) {
    assert_eq!(a.cols, b.cols);
    assert_eq!((c.rows, c.cols), (a.rows, b.rows));
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let s = dot(arow, b.row(j));
            let cv = &mut c[(i, j)];
            *cv = beta * *cv + alpha * s;
        }
    }
}

/// Dot product with four-way accumulation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Deletes rows of an upper-triangular matrix and restores triangularity
/// with orthogonal column operations.
///
/// Given upper-triangular `r` of order `q` and a sorted list of row
/// positions to keep, returns an upper-triangular `m x m` factor `R`
/// (`m = keep.len()`) with `R R^T` equal to `C C^T`, where `C` is `r`
/// restricted to the kept rows, together with the number of plane rotations
/// applied. Deleted rows are processed in decreasing position; deleting the
/// leading row costs no rotations.
pub fn delete_rows_retriangularize(r: &DenseMat, keep: &[usize]) -> (DenseMat, u64) {
    let q = r.rows();
    assert_eq!(q, r.cols());
    debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
    let mut deleted: Vec<usize> = {
        let mut mark = vec![false; q];
        for &k in keep {
            mark[k] = true;
        }
        (0..q).filter(|&i| !mark[i]).collect()
    };
    let mut w = r.clone();
    let mut rotations = 0u64;
    while let Some(d) = deleted.pop() {
        let t = w.rows();
        // Drop row d; rows below shift up, leaving a staircase whose only
        // violations sit in column d above the diagonal.
        let mut tz = DenseMat::zeros(t - 1, t);
        for row in 0..d {
            tz.row_mut(row).copy_from_slice(w.row(row));
        }
        for row in d..t - 1 {
            tz.row_mut(row).copy_from_slice(w.row(row + 1));
        }
        // Rotate columns (rr, d) to zero column d from the bottom up; rows
        // below rr are structurally zero in both columns.
        for rr in (0..d).rev() {
            let x = tz[(rr, rr)];
            let y = tz[(rr, d)];
            if y == 0.0 {
                continue;
            }
            let h = x.hypot(y);
            let (c, s) = (x / h, y / h);
            for row in 0..=rr {
                let a = tz[(row, rr)];
                let b = tz[(row, d)];
                tz[(row, rr)] = c * a + s * b;
                tz[(row, d)] = -s * a + c * b;
            }
            rotations += 1;
        }
        // Column d is now zero; drop it.
        let mut nw = DenseMat::zeros(t - 1, t - 1);
        for row in 0..t - 1 {
            let src = tz.row(row);
            let dst = nw.row_mut(row);
            dst[..d].copy_from_slice(&src[..d]);
            dst[d..].copy_from_slice(&src[d + 1..]);
        }
        w = nw;
    }
    (w, rotations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym_from(vals: &[&[f64]]) -> DenseMat {
        let n = vals.len();
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = vals[i][j];
            }
        }
        m
    }

    #[test]
    fn ldl_roundtrip() {
        let a = sym_from(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -1.0], &[0.5, -1.0, 5.0]]);
        let mut f = a.clone();
        f.ldl_in_place(0.0).unwrap();
        // reassemble L D L^T
        let n = 3;
        let mut back = DenseMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    let lik = if i == k { 1.0 } else if i > k { f[(i, k)] } else { 0.0 };
                    let ljk = if j == k { 1.0 } else if j > k { f[(j, k)] } else { 0.0 };
                    s += lik * f[(k, k)] * ljk;
                }
                back[(i, j)] = s;
            }
        }
        assert!(a.diff_norm(&back) < 1e-14);
    }

    #[test]
    fn ldl_reports_failing_column() {
        let a = sym_from(&[&[1.0, 2.0], &[2.0, 1.0]]); // indefinite
        let mut f = a.clone();
        assert_eq!(f.ldl_in_place(0.0), Err(1));
    }

    #[test]
    fn ldl_solve_matches_direct() {
        let a = sym_from(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -1.0], &[0.5, -1.0, 5.0]]);
        let mut f = a.clone();
        f.ldl_in_place(0.0).unwrap();
        let mut x = vec![1.0, 2.0, 3.0];
        f.ldl_solve_in_place(&mut x);
        // check A x = b
        let b = [1.0, 2.0, 3.0];
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += a[(i, j)] * x[j];
            }
            assert!((s - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_ut_factor_and_solves() {
        let a = sym_from(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -1.0], &[0.5, -1.0, 5.0]]);
        let u = a.factor_upper_ut(0.0).unwrap();
        let mut uut = DenseMat::zeros(3, 3);
        gemm_nt(1.0, &u, &u, 0.0, &mut uut);
        assert!(a.diff_norm(&uut) < 1e-14);

        // R x = b and R^T x = b
        let b = [1.0, -2.0, 0.5];
        let mut x = b.to_vec();
        u.upper_solve_in_place(&mut x);
        for i in 0..3 {
            let mut s = 0.0;
            for k in i..3 {
                s += u[(i, k)] * x[k];
            }
            assert!((s - b[i]).abs() < 1e-13);
        }
        let mut y = b.to_vec();
        u.upper_transpose_solve_in_place(&mut y);
        for i in 0..3 {
            let mut s = 0.0;
            for k in 0..=i {
                s += u[(k, i)] * y[k];
            }
            assert!((s - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn retriangularize_preserves_gram() {
        // random-ish fixed upper triangular 5x5
        let mut r = DenseMat::zeros(5, 5);
        let mut v = 0.3_f64;
        for i in 0..5 {
            for j in i..5 {
                v = (v * 3.7 + 0.13).fract() + 0.2;
                r[(i, j)] = if i == j { v + 1.0 } else { v - 0.5 };
            }
        }
        let keep = [0usize, 2, 3];
        let (rr, _) = delete_rows_retriangularize(&r, &keep);
        assert_eq!(rr.rows(), 3);
        // upper triangular
        for i in 0..3 {
            for j in 0..i {
                assert_eq!(rr[(i, j)], 0.0);
            }
        }
        // gram matches C C^T for C = kept rows of r
        for (a, &ra) in keep.iter().enumerate() {
            for (b, &rb) in keep.iter().enumerate() {
                let want = dot(r.row(ra), r.row(rb));
                let got = dot(rr.row(a), rr.row(b));
                assert!((want - got).abs() < 1e-12, "({a},{b}): {want} vs {got}");
            }
        }
    }

    #[test]
    fn retriangularize_leading_row_deletion_is_free() {
        let mut r = DenseMat::identity(4);
        r[(0, 1)] = 2.0;
        r[(1, 3)] = -1.0;
        let (rr, rot) = delete_rows_retriangularize(&r, &[1, 2, 3]);
        assert_eq!(rot, 0);
        assert_eq!(rr.rows(), 3);
        // trailing block survives unchanged
        assert_eq!(rr[(0, 2)], -1.0);
    }

    #[test]
    fn retriangularize_trailing_row_deletion_rotates() {
        let mut r = DenseMat::identity(3);
        r[(0, 1)] = 1.0;
        r[(0, 2)] = 2.0;
        r[(1, 2)] = 1.0;
        let (_, rot) = delete_rows_retriangularize(&r, &[0, 1]);
        assert_eq!(rot, 2);
    }
}
