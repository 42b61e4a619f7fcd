//! Brute-force dense reference implementations and seeded instance
//! generators.
//!
//! Everything here favors obviousness over speed and shares no code with
//! the sparse recursions, so the two routes can check each other. The dense
//! linear algebra is delegated to `nalgebra`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMat;
use crate::error::NumericError;
use crate::pattern::{SparseSymMatrix, SparsityPattern};
use crate::symbolic::fill_pattern;

fn to_na(a: &DenseMat) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)])
}

fn from_na(a: &DMatrix<f64>) -> DenseMat {
    let mut out = DenseMat::zeros(a.nrows(), a.ncols());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            out[(r, c)] = a[(r, c)];
        }
    }
    out
}

/// Lower-triangular band pattern: column `j` holds rows `j..=j+w` (clipped).
pub fn band_pattern(n: usize, w: usize) -> SparsityPattern {
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j + 1..=(j + w).min(n - 1) {
            entries.push((i, j));
        }
    }
    SparsityPattern::from_entries(n, entries).expect("band entries are valid")
}

/// Arrow pattern: diagonal plus dense final `w` rows.
pub fn arrow_pattern(n: usize, w: usize) -> SparsityPattern {
    assert!(w < n);
    let head = n - w;
    let mut entries = Vec::new();
    for j in 0..head {
        for i in head..n {
            entries.push((i, j));
        }
    }
    for j in head..n {
        for i in j + 1..n {
            entries.push((i, j));
        }
    }
    SparsityPattern::from_entries(n, entries).expect("arrow entries are valid")
}

/// A 17-vertex filled pattern with a mix of supernode shapes, used as a
/// fixture throughout the test suite.
pub fn test_pattern_17() -> SparsityPattern {
    const ENTRIES: [(usize, usize); 39] = [
        (3, 1), (3, 2), (4, 2), (4, 3), (5, 3), (15, 3), (5, 4), (15, 4),
        (9, 5), (15, 5), (16, 5), (9, 6), (16, 6), (8, 7), (9, 7), (15, 7),
        (9, 8), (15, 8), (15, 9), (16, 9), (11, 10), (13, 10), (14, 10), (17, 10),
        (13, 11), (14, 11), (17, 11), (13, 12), (14, 12), (16, 12), (17, 12),
        (14, 13), (16, 13), (17, 13), (16, 14), (17, 14), (16, 15), (17, 15),
        (17, 16),
    ];
    let zero_based = ENTRIES.iter().map(|&(i, j)| (i - 1, j - 1));
    SparsityPattern::from_entries(17, zero_based).expect("fixture entries are valid")
}

/// Random symmetric pattern: each below-diagonal entry is present with
/// probability `density`. Not filled in general.
pub fn random_pattern(n: usize, density: f64, seed: u64) -> SparsityPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j + 1..n {
            if rng.random::<f64>() < density {
                entries.push((i, j));
            }
        }
    }
    SparsityPattern::from_entries(n, entries).expect("random entries are valid")
}

/// Random filled pattern: a random symmetric pattern plus all fill of the
/// natural elimination order.
pub fn gen_chordal(n: usize, density: f64, seed: u64) -> Arc<SparsityPattern> {
    let raw = random_pattern(n, density, seed);
    let order: Vec<usize> = (0..n).collect();
    fill_pattern(&raw, &order)
        .expect("identity order is valid")
        .pattern()
        .clone()
}

/// Seeded positive definite matrix living exactly on `pattern`, built as
/// `L D L^T` from a random unit lower-triangular `L` on the pattern and a
/// random positive diagonal. Requires a filled pattern, which guarantees
/// the product has no entries outside it.
pub fn gen_spd(pattern: &Arc<SparsityPattern>, seed: u64) -> SparseSymMatrix {
    let n = pattern.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l = DenseMat::identity(n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let scale = 0.9 / ((1 + pattern.below_diag(j).len()) as f64).sqrt();
        for &i in pattern.below_diag(j) {
            l[(i, j)] = rng.random_range(-scale..scale);
        }
        d[j] = rng.random_range(0.5..2.0);
    }
    // dense triple product L D L^T
    let mut a = DenseMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..=j {
                s += l[(i, k)] * d[k] * l[(j, k)];
            }
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    dense_project(&a, pattern)
}

/// Seeded projection of a dense positive definite matrix onto `pattern`.
/// The result always admits a positive definite completion.
pub fn gen_completable(pattern: &Arc<SparsityPattern>, seed: u64) -> SparseSymMatrix {
    let n = pattern.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DenseMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            g[(r, c)] = rng.random_range(-1.0..1.0);
        }
    }
    let mut z = DenseMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..n {
                s += g[(i, k)] * g[(j, k)];
            }
            let v = s / n as f64 + if i == j { 0.3 } else { 0.0 };
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    dense_project(&z, pattern)
}

/// Projection of a dense symmetric matrix onto a pattern: keeps the entries
/// on the pattern, drops the rest.
pub fn dense_project(a: &DenseMat, pattern: &Arc<SparsityPattern>) -> SparseSymMatrix {
    let mut x = SparseSymMatrix::zeros(pattern.clone());
    for (i, j, p) in pattern.entries() {
        x.values_mut()[p] = a[(i, j)];
    }
    x
}

/// Filled pattern computed by dense symbolic elimination on a full
/// adjacency matrix.
pub fn dense_symbolic_fill(raw: &SparsityPattern) -> SparsityPattern {
    let n = raw.order();
    let mut adj = vec![vec![false; n]; n];
    for (i, j, _) in raw.entries() {
        adj[i][j] = true;
        adj[j][i] = true;
    }
    for k in 0..n {
        let nbrs: Vec<usize> = (k + 1..n).filter(|&i| adj[i][k]).collect();
        for (a, &i) in nbrs.iter().enumerate() {
            for &j in &nbrs[a + 1..] {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j + 1..n {
            if adj[i][j] {
                entries.push((i, j));
            }
        }
    }
    SparsityPattern::from_entries(n, entries).expect("fill entries are valid")
}

/// Exhaustive scan for a fill-property violation: the first triple
/// `(row, mid, col)` in lexicographic `(col, mid, row)` order with
/// `row > mid > col`, `(row, col)` and `(mid, col)` present, `(row, mid)`
/// absent.
pub fn find_fill_violation(pattern: &SparsityPattern) -> Option<(usize, usize, usize)> {
    let n = pattern.order();
    for k in 0..n {
        let set = pattern.below_diag(k);
        for (a, &j) in set.iter().enumerate() {
            for &i in &set[a + 1..] {
                if !pattern.contains(i, j) {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

/// Dense inverse; `None` when the matrix is singular.
pub fn dense_inverse(a: &DenseMat) -> Option<DenseMat> {
    to_na(a).try_inverse().map(|m| from_na(&m))
}

/// `log det` of a symmetric positive definite matrix; `None` when the
/// Cholesky factorization fails.
pub fn dense_logdet(a: &DenseMat) -> Option<f64> {
    let chol = nalgebra::linalg::Cholesky::new(to_na(a))?;
    let l = chol.l();
    let mut s = 0.0;
    for i in 0..l.nrows() {
        s += l[(i, i)].ln();
    }
    Some(2.0 * s)
}

/// Projected inverse `P(X^{-1})` computed densely.
pub fn projected_inverse_dense(x: &SparseSymMatrix) -> Option<SparseSymMatrix> {
    let inv = dense_inverse(&x.to_dense())?;
    Some(dense_project(&inv, x.pattern()))
}

/// Hessian application `P(X^{-1} Y X^{-1})` computed densely.
pub fn hess_apply_dense(x: &SparseSymMatrix, y: &SparseSymMatrix) -> Option<SparseSymMatrix> {
    let xi = to_na(&dense_inverse(&x.to_dense())?);
    let yd = to_na(&y.to_dense());
    let m = &xi * yd * &xi;
    Some(dense_project(&from_na(&m), x.pattern()))
}

/// Coordinates of a matrix in the orthonormal pattern basis: diagonal
/// entries as-is, off-diagonal entries scaled by `sqrt(2)`, in storage
/// order.
pub fn to_coords(x: &SparseSymMatrix) -> Vec<f64> {
    let s2 = 2.0_f64.sqrt();
    x.pattern()
        .entries()
        .map(|(i, j, p)| if i == j { x.values()[p] } else { s2 * x.values()[p] })
        .collect()
}

/// Inverse of [`to_coords`].
pub fn from_coords(pattern: &Arc<SparsityPattern>, coords: &[f64]) -> SparseSymMatrix {
    assert_eq!(coords.len(), pattern.nnz());
    let s2 = 2.0_f64.sqrt();
    let mut x = SparseSymMatrix::zeros(pattern.clone());
    for (i, j, p) in pattern.entries() {
        x.values_mut()[p] = if i == j { coords[p] } else { coords[p] / s2 };
    }
    x
}

/// Matrix of the map `Y -> P(X^{-1} Y X^{-1})` in the orthonormal pattern
/// basis. Symmetric and positive definite for positive definite `X`.
/// `None` when `X` is singular.
pub fn dense_hessian_matrix(x: &SparseSymMatrix) -> Option<DenseMat> {
    let z = dense_inverse(&x.to_dense())?;
    let pat = x.pattern();
    let pos: Vec<(usize, usize)> = pat.entries().map(|(i, j, _)| (i, j)).collect();
    let m = pos.len();
    let mut h = DenseMat::zeros(m, m);
    let scale = |i: usize, j: usize| if i == j { 0.5 } else { 1.0 / 2.0_f64.sqrt() };
    for p in 0..m {
        let (a, b) = pos[p];
        let sp = scale(a, b);
        for q in p..m {
            let (c, d) = pos[q];
            let sq = scale(c, d);
            let v = 2.0 * sp * sq * (z[(a, c)] * z[(b, d)] + z[(a, d)] * z[(b, c)]);
            h[(p, q)] = v;
            h[(q, p)] = v;
        }
    }
    Some(h)
}

/// Eigenvalues of a symmetric matrix, unordered.
pub fn sym_eigenvalues(a: &DenseMat) -> Vec<f64> {
    let eig = nalgebra::linalg::SymmetricEigen::new(to_na(a));
    eig.eigenvalues.iter().copied().collect()
}

/// Solves a dense linear system by LU with partial pivoting; `None` when
/// the matrix is singular.
pub fn solve_dense(a: &DenseMat, rhs: &[f64]) -> Option<Vec<f64>> {
    let lu = to_na(a).lu();
    let b = nalgebra::DVector::from_column_slice(rhs);
    lu.solve(&b).map(|v| v.iter().copied().collect())
}

/// Default step for the finite-difference probes, scaled to the operand
/// magnitudes.
pub fn default_fd_step(x: &SparseSymMatrix, y: &SparseSymMatrix) -> f64 {
    let ny = y.fro_norm();
    if ny == 0.0 {
        return 1e-4;
    }
    1e-4 * x.fro_norm() / ny
}

fn probe(x: &SparseSymMatrix, y: &SparseSymMatrix, t: f64) -> Result<DMatrix<f64>, NumericError> {
    let n = x.order();
    let xd = x.to_dense();
    let yd = y.to_dense();
    let mut p = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            p[(r, c)] = xd[(r, c)] + t * yd[(r, c)];
        }
    }
    if nalgebra::linalg::Cholesky::new(p.clone()).is_none() {
        return Err(NumericError::IndefiniteAtProbe);
    }
    Ok(p)
}

/// Central-difference approximation of the directional derivative of
/// `f(X) = -log det X` along `Y`, i.e. the pairing of the gradient with
/// `Y`. Error is `O(step^2)`.
pub fn finite_diff_gradient(
    x: &SparseSymMatrix,
    y: &SparseSymMatrix,
    step: f64,
) -> Result<f64, NumericError> {
    let plus = probe(x, y, step)?;
    let minus = probe(x, y, -step)?;
    let f = |m: DMatrix<f64>| -> f64 {
        let chol = nalgebra::linalg::Cholesky::new(m).expect("probe already verified");
        let l = chol.l();
        -2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    };
    Ok((f(plus) - f(minus)) / (2.0 * step))
}

/// Central-difference approximation of the Hessian application
/// `P(X^{-1} Y X^{-1})`, from gradients of `f(X) = -log det X` at
/// `X +- step Y`. Error is `O(step^2)`.
pub fn finite_diff_hessian(
    x: &SparseSymMatrix,
    y: &SparseSymMatrix,
    step: f64,
) -> Result<SparseSymMatrix, NumericError> {
    let plus = probe(x, y, step)?;
    let minus = probe(x, y, -step)?;
    let grad = |m: DMatrix<f64>| -> DenseMat {
        let inv = m.try_inverse().expect("probe is positive definite");
        from_na(&inv)
    };
    let gp = grad(plus);
    let gm = grad(minus);
    let pat = x.pattern();
    let mut out = SparseSymMatrix::zeros(pat.clone());
    for (i, j, p) in pat.entries() {
        // gradients are -P(inverse); subtracting them in the opposite
        // order absorbs the sign
        out.values_mut()[p] = (gm[(i, j)] - gp[(i, j)]) / (2.0 * step);
    }
    Ok(out)
}
