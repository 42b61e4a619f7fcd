//! Column-at-a-time numeric sweeps over the elimination tree.
//!
//! Every operation here walks the postorder (or its reverse) once,
//! assembling for each vertex `j` a dense frontal matrix of order
//! `1 + |I_j|` indexed by `{j} ∪ I_j`. Information flows between a vertex
//! and its parent through dense update matrices kept on a last-in
//! first-out stack; the postorder guarantees the top of the stack always
//! belongs to the vertex being processed.
//!
//! The factorization is `X = L D L^T` with `L` unit lower triangular on
//! the pattern and `D` a positive diagonal. Forward sweeps (factor,
//! product) consume children before parents; reverse sweeps (projected
//! inverse, completion) hand dense principal submatrices `V_j = S_{I_j
//! I_j}` down from parents to children.

use std::sync::Arc;

use crate::dense::{delete_rows_retriangularize, DenseMat};
use crate::error::{Error, NumericError, StructureError};
use crate::pattern::SparseSymMatrix;
use crate::symbolic::{extend_add, extract, SymbolicAnalysis};

/// Relative pivot floor: a front pivot at or below this multiple of the
/// largest initial diagonal entry aborts the sweep.
pub(crate) const PIVOT_REL_FLOOR: f64 = 1e-14;

/// Unit lower-triangular factor and positive diagonal of `X = L D L^T`,
/// sharing the sparsity pattern of `X`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    sym: Arc<SymbolicAnalysis>,
    lvals: Vec<f64>,
    diag: Vec<f64>,
}

impl CholeskyFactor {
    /// The factor of the identity matrix: `L = I`, `D = I`.
    pub fn identity(sym: &Arc<SymbolicAnalysis>) -> CholeskyFactor {
        let mut lvals = vec![0.0; sym.pattern().nnz()];
        for j in 0..sym.order() {
            lvals[sym.pattern().col_range(j).start] = 1.0;
        }
        CholeskyFactor {
            sym: sym.clone(),
            lvals,
            diag: vec![1.0; sym.order()],
        }
    }

    /// Assembles a factor from raw parts. `lvals` is pattern-aligned with
    /// unit diagonal slots; `diag` must be positive.
    pub fn from_parts(
        sym: &Arc<SymbolicAnalysis>,
        lvals: Vec<f64>,
        diag: Vec<f64>,
    ) -> Result<CholeskyFactor, Error> {
        if lvals.len() != sym.pattern().nnz() || diag.len() != sym.order() {
            return Err(StructureError::Mismatch("factor value lengths do not match the pattern").into());
        }
        for j in 0..sym.order() {
            if lvals[sym.pattern().col_range(j).start] != 1.0 {
                return Err(StructureError::Mismatch("factor diagonal slots must hold 1").into());
            }
            if diag[j] <= 0.0 {
                return Err(NumericError::NotPositiveDefinite { column: j }.into());
            }
        }
        Ok(CholeskyFactor { sym: sym.clone(), lvals, diag })
    }

    pub fn sym(&self) -> &Arc<SymbolicAnalysis> {
        &self.sym
    }

    pub fn order(&self) -> usize {
        self.sym.order()
    }

    /// Pattern-aligned `L` values; the slot of each diagonal holds 1.
    pub fn lvals(&self) -> &[f64] {
        &self.lvals
    }

    /// Below-diagonal values of column `j` of `L`, aligned with
    /// `colset(j)`.
    pub fn lcol(&self, j: usize) -> &[f64] {
        &self.lvals[self.sym.pattern().col_range(j)][1..]
    }

    /// Diagonal of `D`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

/// Last-in first-out store of dense update matrices, each labeled by the
/// vertex that produced (forward sweeps) or will consume (reverse sweeps)
/// it.
pub struct UpdateStack {
    entries: Vec<(usize, DenseMat)>,
}

impl UpdateStack {
    pub fn with_capacity(entries: usize) -> UpdateStack {
        UpdateStack { entries: Vec::with_capacity(entries) }
    }

    pub fn push(&mut self, vertex: usize, update: DenseMat) {
        self.entries.push((vertex, update));
    }

    /// Pops the top entry, which must belong to `vertex`.
    pub fn pop(&mut self, vertex: usize) -> DenseMat {
        let (label, update) = self.entries.pop().expect("update stack underflow");
        assert_eq!(label, vertex, "update stack out of postorder");
        update
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Work counts accumulated by a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Frontal matrices assembled (one per vertex or supernode visited).
    pub frontal_assemblies: u64,
    /// Plane rotations spent re-triangularizing after row deletion.
    pub retri_rotations: u64,
}

pub(crate) fn check_pattern(x: &SparseSymMatrix, sym: &SymbolicAnalysis) -> Result<(), Error> {
    if !Arc::ptr_eq(x.pattern(), sym.pattern()) && **x.pattern() != **sym.pattern() {
        return Err(StructureError::Mismatch("matrix pattern does not match the analysis").into());
    }
    Ok(())
}

pub(crate) fn pivot_floor(x: &SparseSymMatrix) -> f64 {
    let mut scale: f64 = 0.0;
    for j in 0..x.order() {
        scale = scale.max(x.col_values(j)[0].abs());
    }
    PIVOT_REL_FLOOR * scale
}

/// Factors `X = L D L^T` by one forward sweep.
///
/// Per vertex the front is the bordered column of `X` plus the children's
/// update matrices; its pivot becomes `D_jj`, the scaled subcolumn becomes
/// `L_{I_j j}`, and the Schur complement is pushed for the parent.
pub fn factor(
    x: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<CholeskyFactor, Error> {
    factor_counted(x, sym).map(|(f, _)| f)
}

pub fn factor_counted(
    x: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<(CholeskyFactor, Counters), Error> {
    check_pattern(x, sym)?;
    let pat = sym.pattern();
    let floor = pivot_floor(x);
    let mut lvals = vec![0.0; pat.nnz()];
    let mut diag = vec![0.0; sym.order()];
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    let mut counters = Counters::default();

    for &j in sym.postorder() {
        let set = sym.colset(j);
        let m = 1 + set.len();
        let mut front = DenseMat::zeros(m, m);
        let xcol = x.col_values(j);
        for (t, &v) in xcol.iter().enumerate() {
            front[(t, 0)] = v;
        }
        for &c in sym.children(j).iter().rev() {
            let update = stack.pop(c);
            extend_add(&mut front, &update, sym.relidx(c));
        }
        counters.frontal_assemblies += 1;

        let d = front[(0, 0)];
        if d <= floor {
            return Err(NumericError::NotPositiveDefinite { column: j }.into());
        }
        diag[j] = d;
        let lrange = pat.col_range(j);
        lvals[lrange.start] = 1.0;
        for t in 0..set.len() {
            lvals[lrange.start + 1 + t] = front[(t + 1, 0)] / d;
        }
        if sym.parent(j).is_some() {
            let l = &lvals[pat.col_range(j)][1..];
            let mut update = DenseMat::zeros(set.len(), set.len());
            for r in 0..set.len() {
                for c in 0..=r {
                    let v = front[(r + 1, c + 1)] - d * l[r] * l[c];
                    update[(r, c)] = v;
                    update[(c, r)] = v;
                }
            }
            stack.push(j, update);
        }
    }
    debug_assert!(stack.is_empty());
    Ok((CholeskyFactor { sym: sym.clone(), lvals, diag }, counters))
}

/// Multiplies the factors back into `X = L D L^T` by one forward sweep,
/// inverse to [`factor`].
pub fn product(f: &CholeskyFactor) -> SparseSymMatrix {
    product_counted(f).0
}

pub fn product_counted(f: &CholeskyFactor) -> (SparseSymMatrix, Counters) {
    let sym = &f.sym;
    let pat = sym.pattern();
    let mut x = SparseSymMatrix::zeros(pat.clone());
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    let mut counters = Counters::default();

    for &j in sym.postorder() {
        let set = sym.colset(j);
        let m = 1 + set.len();
        // front = D_jj [1; l] [1; l]^T plus the children's contributions
        let mut front = DenseMat::zeros(m, m);
        let d = f.diag[j];
        let l = f.lcol(j);
        front[(0, 0)] = d;
        for r in 0..set.len() {
            front[(r + 1, 0)] = d * l[r];
            front[(0, r + 1)] = d * l[r];
            for c in 0..=r {
                let v = d * l[r] * l[c];
                front[(r + 1, c + 1)] = v;
                front[(c + 1, r + 1)] = v;
            }
        }
        for &c in sym.children(j).iter().rev() {
            let update = stack.pop(c);
            extend_add(&mut front, &update, sym.relidx(c));
        }
        counters.frontal_assemblies += 1;

        let xcol = x.col_values_mut(j);
        for (t, v) in xcol.iter_mut().enumerate() {
            *v = front[(t, 0)];
        }
        if sym.parent(j).is_some() {
            let mut update = DenseMat::zeros(set.len(), set.len());
            for r in 0..set.len() {
                for c in 0..set.len() {
                    update[(r, c)] = front[(r + 1, c + 1)];
                }
            }
            stack.push(j, update);
        }
    }
    debug_assert!(stack.is_empty());
    (x, counters)
}

/// Projected inverse `S = P(X^{-1})` from the factors of `X`, by one
/// reverse sweep; `-S` is the barrier gradient at `X`.
///
/// Parents hand each child the dense block `V_i = S_{I_i I_i}` extracted
/// from their own front, so no entry of the inverse outside the pattern is
/// ever formed.
pub fn projected_inverse(f: &CholeskyFactor) -> SparseSymMatrix {
    projected_inverse_counted(f).0
}

pub fn projected_inverse_counted(f: &CholeskyFactor) -> (SparseSymMatrix, Counters) {
    let sym = &f.sym;
    let pat = sym.pattern();
    let mut s = SparseSymMatrix::zeros(pat.clone());
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    let mut counters = Counters::default();

    for &j in sym.postorder().iter().rev() {
        let set = sym.colset(j);
        let v = if sym.parent(j).is_some() {
            stack.pop(j)
        } else {
            DenseMat::zeros(set.len(), set.len())
        };
        let l = f.lcol(j);
        // S_{I_j j} = -V_j l, S_jj = 1/D_jj - S_{I_j j}^T l
        let mut scol = vec![0.0; set.len()];
        for r in 0..set.len() {
            scol[r] = -crate::dense::dot(v.row(r), l);
        }
        let mut sjj = 1.0 / f.diag[j];
        for r in 0..set.len() {
            sjj -= scol[r] * l[r];
        }
        let out = s.col_values_mut(j);
        out[0] = sjj;
        out[1..].copy_from_slice(&scol);
        counters.frontal_assemblies += 1;

        if !sym.children(j).is_empty() {
            let m = 1 + set.len();
            let mut front = DenseMat::zeros(m, m);
            front[(0, 0)] = sjj;
            for r in 0..set.len() {
                front[(r + 1, 0)] = scol[r];
                front[(0, r + 1)] = scol[r];
                for c in 0..set.len() {
                    front[(r + 1, c + 1)] = v[(r, c)];
                }
            }
            for &c in sym.children(j) {
                stack.push(c, extract(&front, sym.relidx(c)));
            }
        }
    }
    debug_assert!(stack.is_empty());
    (s, counters)
}

/// Factors of the matrix `X̂` on the pattern whose inverse completes `S`:
/// `P(X̂^{-1}) = S`, and among all positive definite completions of `S`
/// the matrix `X̂^{-1}` has maximum determinant. One reverse sweep; each
/// column solves a dense system with `V_j = S_{I_j I_j}`.
pub fn completion(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<CholeskyFactor, Error> {
    completion_counted(s, sym).map(|(f, _)| f)
}

pub fn completion_counted(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<(CholeskyFactor, Counters), Error> {
    check_pattern(s, sym)?;
    let pat = sym.pattern();
    let mut lvals = vec![0.0; pat.nnz()];
    let mut diag = vec![0.0; sym.order()];
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    let mut counters = Counters::default();

    for &j in sym.postorder().iter().rev() {
        let set = sym.colset(j);
        let mut v = if sym.parent(j).is_some() {
            stack.pop(j)
        } else {
            DenseMat::zeros(set.len(), set.len())
        };
        let scol_all = s.col_values(j);
        let sjj = scol_all[0];
        let scol = &scol_all[1..];

        // children read the bordered block [[sjj, scol^T], [scol, V_j]]
        // before V_j is factored in place below
        for &c in sym.children(j) {
            stack.push(c, extract_bordered(sjj, scol, &v, sym.relidx(c)));
        }
        counters.frontal_assemblies += 1;

        // L_{I_j j} = -V_j^{-1} S_{I_j j} by a fresh dense factorization
        let lrange = pat.col_range(j);
        lvals[lrange.start] = 1.0;
        let l = &mut lvals[lrange.start + 1..lrange.end];
        l.copy_from_slice(scol);
        if !set.is_empty() {
            let vtol = PIVOT_REL_FLOOR * v.max_abs_diag();
            if v.ldl_in_place(vtol).is_err() {
                return Err(NumericError::NoPositiveCompletion { column: j }.into());
            }
            v.ldl_solve_in_place(l);
            l.iter_mut().for_each(|t| *t = -*t);
        }
        let mut dinv = sjj;
        for r in 0..set.len() {
            dinv += scol[r] * l[r];
        }
        if dinv <= PIVOT_REL_FLOOR * sjj.abs() {
            return Err(NumericError::NoPositiveCompletion { column: j }.into());
        }
        diag[j] = 1.0 / dinv;
    }
    debug_assert!(stack.is_empty());
    Ok((CholeskyFactor { sym: sym.clone(), lvals, diag }, counters))
}

/// Extracts rows and columns `idx` of the virtual bordered matrix
/// `[[sjj, scol^T], [scol, v]]` without materializing it.
fn extract_bordered(sjj: f64, scol: &[f64], v: &DenseMat, idx: &[usize]) -> DenseMat {
    let m = idx.len();
    let mut out = DenseMat::zeros(m, m);
    let lead = usize::from(idx.first() == Some(&0));
    if lead == 1 {
        out[(0, 0)] = sjj;
        for c in 1..m {
            let s = scol[idx[c] - 1];
            out[(0, c)] = s;
            out[(c, 0)] = s;
        }
    }
    for r in lead..m {
        let i = idx[r] - 1;
        for c in lead..m {
            out[(r, c)] = v[(i, idx[c] - 1)];
        }
    }
    out
}

/// Same result as [`completion`], but propagating upper-triangular factors
/// `R_j` with `V_j = R_j R_j^T` instead of the blocks `V_j` themselves.
///
/// Each column costs two triangular solves; each child factor is derived
/// by deleting rows of `R_j` and restoring triangularity with plane
/// rotations, then bordering with the solved column. The rotation count is
/// reported in the counters and is zero when deleted rows are always the
/// leading row, as on arrow patterns.
pub fn completion_factored(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<CholeskyFactor, Error> {
    completion_factored_counted(s, sym).map(|(f, _)| f)
}

pub fn completion_factored_counted(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<(CholeskyFactor, Counters), Error> {
    check_pattern(s, sym)?;
    let pat = sym.pattern();
    let mut lvals = vec![0.0; pat.nnz()];
    let mut diag = vec![0.0; sym.order()];
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    let mut counters = Counters::default();

    for &j in sym.postorder().iter().rev() {
        let set = sym.colset(j);
        let r_j = if sym.parent(j).is_some() {
            stack.pop(j)
        } else {
            DenseMat::zeros(set.len(), set.len())
        };
        let scol_all = s.col_values(j);
        let sjj = scol_all[0];
        let scol = &scol_all[1..];

        // w = R_j^{-1} S_{I_j j}, L_{I_j j} = -R_j^{-T} w
        let mut w = scol.to_vec();
        r_j.upper_solve_in_place(&mut w);
        let mut l = w.clone();
        r_j.upper_transpose_solve_in_place(&mut l);
        l.iter_mut().for_each(|t| *t = -*t);

        let dinv = sjj - w.iter().map(|t| t * t).sum::<f64>();
        if dinv <= PIVOT_REL_FLOOR * sjj.abs() {
            return Err(NumericError::NoPositiveCompletion { column: j }.into());
        }
        diag[j] = 1.0 / dinv;
        let lrange = pat.col_range(j);
        lvals[lrange.start] = 1.0;
        lvals[lrange.start + 1..lrange.end].copy_from_slice(&l);
        counters.frontal_assemblies += 1;

        // child factors: delete the rows of R_j outside the child's set,
        // re-triangularize, and border with the solved column
        for &c in sym.children(j) {
            let keep: Vec<usize> = sym.relidx(c)[1..].iter().map(|&p| p - 1).collect();
            let (rt, rots) = delete_rows_retriangularize(&r_j, &keep);
            counters.retri_rotations += rots;
            let mut z: Vec<f64> = keep.iter().map(|&p| scol[p]).collect();
            rt.upper_solve_in_place(&mut z);
            let alpha2 = sjj - z.iter().map(|t| t * t).sum::<f64>();
            if alpha2 <= 0.0 {
                return Err(NumericError::NumericalBreakdown { column: c }.into());
            }
            let m = 1 + keep.len();
            let mut rc = DenseMat::zeros(m, m);
            rc[(0, 0)] = alpha2.sqrt();
            for t in 0..keep.len() {
                rc[(0, t + 1)] = z[t];
                for u in t..keep.len() {
                    rc[(t + 1, u + 1)] = rt[(t, u)];
                }
            }
            stack.push(c, rc);
        }
    }
    debug_assert!(stack.is_empty());
    Ok((CholeskyFactor { sym: sym.clone(), lvals, diag }, counters))
}

/// `log det X` from the factor: the sum of the log pivots.
pub fn logdet(f: &CholeskyFactor) -> f64 {
    f.diag.iter().map(|d| d.ln()).sum()
}

/// Value of the conjugate barrier `f*(S) = log det X̂ - n`, where `X̂` is
/// the completion of `S`.
pub fn dual_barrier_value(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
) -> Result<f64, Error> {
    let f = completion(s, sym)?;
    Ok(logdet(&f) - sym.order() as f64)
}
