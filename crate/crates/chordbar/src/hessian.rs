//! Application, inversion, and factorization of the barrier Hessian.
//!
//! At a positive definite `X` on the pattern, the Hessian of
//! `f(X) = -log det X` maps `Y` to `P(X^{-1} Y X^{-1})`. With the factors
//! `X = L D L^T` and the projected inverse `S = P(X^{-1})` in hand, the
//! map splits into three sweeps over the elimination tree:
//!
//! 1. a forward sweep differentiating the factorization, turning `Y` into
//!    column data `K` (the derivative of `D` and scaled derivative of `L`),
//! 2. a per-column scaling by `D_jj` and the dense blocks
//!    `V_j = S_{I_j I_j}`,
//! 3. a reverse sweep differentiating the completion, turning the scaled
//!    data into `T = P(X^{-1} Y X^{-1})`.
//!
//! Running the three steps backwards with inverted scalings applies the
//! inverse Hessian. Splitting the middle scaling symmetrically between
//! steps 1 and 3 factors the Hessian as `R^adj ∘ R`, whose halves this
//! module also exposes; their sparse-argument variant prunes subtrees that
//! hold no data, which makes assembling Gram matrices of many sparse
//! directions cheap.
//!
//! Step 2 needs `V_j` (or its triangular factor) per column. Applications
//! propagate the blocks down the tree inside the sweep; the solve and the
//! factor halves instead use cached upper-triangular factors
//! `V_j = R_j R_j^T`, computed once per context on first use.

use std::sync::{Arc, OnceLock};

use crate::dense::{delete_rows_retriangularize, dot, DenseMat};
use crate::error::{Error, NumericError, StructureError};
use crate::multifrontal::{projected_inverse, CholeskyFactor, UpdateStack};
use crate::pattern::SparseSymMatrix;
use crate::symbolic::{extend_add, extract, SymbolicAnalysis};

/// Factor of `X`, projected inverse of `X`, and the per-column caches that
/// Hessian operations share.
pub struct HessianContext {
    factor: CholeskyFactor,
    s: SparseSymMatrix,
    rfactors: OnceLock<Result<Vec<DenseMat>, NumericError>>,
}

impl HessianContext {
    /// Builds a context from the factor, computing the projected inverse.
    pub fn new(factor: CholeskyFactor) -> HessianContext {
        let s = projected_inverse(&factor);
        HessianContext { factor, s, rfactors: OnceLock::new() }
    }

    /// Builds a context from a factor and a previously computed projected
    /// inverse, verifying their consistency.
    pub fn from_parts(
        factor: CholeskyFactor,
        s: SparseSymMatrix,
    ) -> Result<HessianContext, Error> {
        let check = projected_inverse(&factor);
        if !Arc::ptr_eq(s.pattern(), factor.sym().pattern())
            && **s.pattern() != **factor.sym().pattern()
        {
            return Err(StructureError::Mismatch("projected inverse pattern does not match the factor").into());
        }
        let tol = 1e-10 * check.fro_norm().max(1.0);
        for (a, b) in s.values().iter().zip(check.values()) {
            if (a - b).abs() > tol {
                return Err(StructureError::Mismatch("projected inverse is not consistent with the factor").into());
            }
        }
        Ok(HessianContext { factor, s, rfactors: OnceLock::new() })
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// The projected inverse `S = P(X^{-1})`; `-S` is the gradient at `X`.
    pub fn projected_inverse(&self) -> &SparseSymMatrix {
        &self.s
    }

    fn sym(&self) -> &Arc<SymbolicAnalysis> {
        self.factor.sym()
    }

    /// Upper-triangular factors `R_j R_j^T = S_{I_j I_j}`, derived from
    /// parent factors by row deletion down the tree and cached on first
    /// use.
    fn rfactors(&self) -> Result<&[DenseMat], Error> {
        let cache = self.rfactors.get_or_init(|| build_rfactors(self.sym(), &self.s));
        match cache {
            Ok(r) => Ok(r),
            Err(e) => Err((*e).into()),
        }
    }
}

fn build_rfactors(
    sym: &Arc<SymbolicAnalysis>,
    s: &SparseSymMatrix,
) -> Result<Vec<DenseMat>, NumericError> {
    let n = sym.order();
    let mut rf: Vec<DenseMat> = vec![DenseMat::zeros(0, 0); n];
    for &j in sym.postorder().iter().rev() {
        let deg = sym.colset(j).len();
        let Some(p) = sym.parent(j) else {
            debug_assert_eq!(deg, 0);
            continue;
        };
        // V_j is the parent front block [[S_pp, b^T], [b, V_p[keep]]];
        // delete the unused rows of R_p, then border with the solved column
        let keep: Vec<usize> = sym.relidx(j)[1..].iter().map(|&t| t - 1).collect();
        let (rt, _) = delete_rows_retriangularize(&rf[p], &keep);
        let scol = &s.col_values(p)[1..];
        let mut z: Vec<f64> = keep.iter().map(|&t| scol[t]).collect();
        rt.upper_solve_in_place(&mut z);
        let spp = s.col_values(p)[0];
        let alpha2 = spp - z.iter().map(|t| t * t).sum::<f64>();
        if alpha2 <= 0.0 {
            return Err(NumericError::NumericalBreakdown { column: j });
        }
        let mut rj = DenseMat::zeros(deg, deg);
        rj[(0, 0)] = alpha2.sqrt();
        for t in 0..keep.len() {
            rj[(0, t + 1)] = z[t];
            for u in t..keep.len() {
                rj[(t + 1, u + 1)] = rt[(t, u)];
            }
        }
        rf[j] = rj;
    }
    Ok(rf)
}

/// `y = R x` for upper-triangular `R`.
fn upper_matvec(r: &DenseMat, x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut y = vec![0.0; m];
    for t in 0..m {
        y[t] = dot(&r.row(t)[t..], &x[t..]);
    }
    y
}

/// `y = R^T x` for upper-triangular `R`.
fn upper_transpose_matvec(r: &DenseMat, x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut y = vec![0.0; m];
    for u in 0..m {
        let xu = x[u];
        if xu == 0.0 {
            continue;
        }
        let row = r.row(u);
        for (t, yt) in y.iter_mut().enumerate().skip(u) {
            *yt += row[t] * xu;
        }
    }
    y
}

fn check_arg(ctx: &HessianContext, y: &SparseSymMatrix) -> Result<(), Error> {
    if !Arc::ptr_eq(y.pattern(), ctx.sym().pattern()) && **y.pattern() != **ctx.sym().pattern() {
        return Err(StructureError::Mismatch("argument pattern does not match the context").into());
    }
    Ok(())
}

/// Forward sweep differentiating the factorization: turns `Y` into
/// pattern-aligned column data `K` (diagonal slot `K_jj`, below-diagonal
/// slots `K_{I_j j}`). When `reachable` is given, vertices outside it are
/// skipped; their subtrees must carry no data.
fn linearized_factor_sweep(
    ctx: &HessianContext,
    y: &SparseSymMatrix,
    reachable: Option<&[bool]>,
) -> Vec<f64> {
    let sym = ctx.sym();
    let pat = sym.pattern();
    let f = &ctx.factor;
    let mut kvals = vec![0.0; pat.nnz()];
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());

    for &j in sym.postorder() {
        if let Some(mask) = reachable {
            if !mask[j] {
                continue;
            }
        }
        let set = sym.colset(j);
        let m = 1 + set.len();
        let mut front = DenseMat::zeros(m, m);
        for (t, &v) in y.col_values(j).iter().enumerate() {
            front[(t, 0)] = v;
            front[(0, t)] = v;
        }
        for &c in sym.children(j).iter().rev() {
            if reachable.is_some_and(|mask| !mask[c]) {
                continue;
            }
            let update = stack.pop(c);
            extend_add(&mut front, &update, sym.relidx(c));
        }

        let a = front[(0, 0)];
        let l = f.lcol(j);
        let krange = pat.col_range(j);
        kvals[krange.start] = a;
        for t in 0..set.len() {
            kvals[krange.start + 1 + t] = front[(t + 1, 0)] - a * l[t];
        }
        if sym.parent(j).is_some() {
            // U'_j = C - l b^T - b l^T + a l l^T
            let mut update = DenseMat::zeros(set.len(), set.len());
            for r in 0..set.len() {
                let br = front[(r + 1, 0)];
                for c in 0..=r {
                    let bc = front[(c + 1, 0)];
                    let v = front[(r + 1, c + 1)] - l[r] * bc - br * l[c] + a * l[r] * l[c];
                    update[(r, c)] = v;
                    update[(c, r)] = v;
                }
            }
            stack.push(j, update);
        }
    }
    debug_assert!(stack.is_empty());
    kvals
}

/// Reverse sweep differentiating the completion: turns pattern-aligned
/// column data `M` into the output matrix, propagating the blocks
/// `V'_j` of the output down the tree.
fn linearized_completion_sweep(ctx: &HessianContext, mvals: &[f64]) -> SparseSymMatrix {
    let sym = ctx.sym();
    let pat = sym.pattern();
    let f = &ctx.factor;
    let mut t = SparseSymMatrix::zeros(pat.clone());
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());

    for &j in sym.postorder().iter().rev() {
        let set = sym.colset(j);
        let vp = if sym.parent(j).is_some() {
            stack.pop(j)
        } else {
            DenseMat::zeros(set.len(), set.len())
        };
        let l = f.lcol(j);
        let mrange = pat.col_range(j);
        let m_jj = mvals[mrange.start];
        let m_col = &mvals[mrange.start + 1..mrange.end];

        // T_jj = M_jj - 2 l^T M_col + l^T V'_j l, T_col = M_col - V'_j l
        let w: Vec<f64> = (0..set.len()).map(|r| dot(vp.row(r), l)).collect();
        let t_jj = m_jj - 2.0 * dot(l, m_col) + dot(l, &w);
        let t_col: Vec<f64> = (0..set.len()).map(|r| m_col[r] - w[r]).collect();
        let out = t.col_values_mut(j);
        out[0] = t_jj;
        out[1..].copy_from_slice(&t_col);

        if !sym.children(j).is_empty() {
            let mm = 1 + set.len();
            let mut front = DenseMat::zeros(mm, mm);
            front[(0, 0)] = t_jj;
            for r in 0..set.len() {
                front[(r + 1, 0)] = t_col[r];
                front[(0, r + 1)] = t_col[r];
                for c in 0..set.len() {
                    front[(r + 1, c + 1)] = vp[(r, c)];
                }
            }
            for &c in sym.children(j) {
                stack.push(c, extract(&front, sym.relidx(c)));
            }
        }
    }
    debug_assert!(stack.is_empty());
    t
}

/// Applies the Hessian: `T = P(X^{-1} Y X^{-1})`.
///
/// The middle scaling needs `V_j = S_{I_j I_j}`, which is propagated down
/// the tree inside the reverse sweep alongside the output blocks, so the
/// blocks are never re-extracted from scratch.
pub fn hess_apply(ctx: &HessianContext, y: &SparseSymMatrix) -> Result<SparseSymMatrix, Error> {
    check_arg(ctx, y)?;
    let sym = ctx.sym();
    let pat = sym.pattern();
    let f = &ctx.factor;
    let kvals = linearized_factor_sweep(ctx, y, None);

    let mut t = SparseSymMatrix::zeros(pat.clone());
    let mut vstack = UpdateStack::with_capacity(sym.peak_stack_entries());
    let mut tstack = UpdateStack::with_capacity(sym.peak_stack_entries());

    for &j in sym.postorder().iter().rev() {
        let set = sym.colset(j);
        let (v, vp) = if sym.parent(j).is_some() {
            let v = vstack.pop(j);
            let vp = tstack.pop(j);
            (v, vp)
        } else {
            let z = DenseMat::zeros(set.len(), set.len());
            (z.clone(), z)
        };
        let l = f.lcol(j);
        let d = f.diag()[j];
        let krange = pat.col_range(j);
        let k_jj = kvals[krange.start];
        let k_col = &kvals[krange.start + 1..krange.end];

        // M_jj = K_jj / D_jj^2, M_col = V_j K_col / D_jj
        let m_jj = k_jj / (d * d);
        let m_col: Vec<f64> = (0..set.len()).map(|r| dot(v.row(r), k_col) / d).collect();

        // T_jj = M_jj - 2 l^T M_col + l^T V'_j l, T_col = M_col - V'_j l
        let w: Vec<f64> = (0..set.len()).map(|r| dot(vp.row(r), l)).collect();
        let t_jj = m_jj - 2.0 * dot(l, &m_col) + dot(l, &w);
        let t_col: Vec<f64> = (0..set.len()).map(|r| m_col[r] - w[r]).collect();
        let out = t.col_values_mut(j);
        out[0] = t_jj;
        out[1..].copy_from_slice(&t_col);

        if !sym.children(j).is_empty() {
            let mm = 1 + set.len();
            let mut sfront = DenseMat::zeros(mm, mm);
            let mut tfront = DenseMat::zeros(mm, mm);
            let scol = ctx.s.col_values(j);
            sfront[(0, 0)] = scol[0];
            tfront[(0, 0)] = t_jj;
            for r in 0..set.len() {
                sfront[(r + 1, 0)] = scol[1 + r];
                sfront[(0, r + 1)] = scol[1 + r];
                tfront[(r + 1, 0)] = t_col[r];
                tfront[(0, r + 1)] = t_col[r];
                for c in 0..set.len() {
                    sfront[(r + 1, c + 1)] = v[(r, c)];
                    tfront[(r + 1, c + 1)] = vp[(r, c)];
                }
            }
            for &c in sym.children(j) {
                vstack.push(c, extract(&sfront, sym.relidx(c)));
                tstack.push(c, extract(&tfront, sym.relidx(c)));
            }
        }
    }
    debug_assert!(vstack.is_empty() && tstack.is_empty());
    Ok(t)
}

/// Applies the inverse Hessian: the `Y` on the pattern with
/// `P(X^{-1} Y X^{-1}) = T`.
///
/// Runs the three steps of [`hess_apply`] backwards: a reverse sweep
/// undoing the completion derivative, the inverted middle scaling using
/// the cached factors of `V_j`, and a forward sweep undoing the
/// factorization derivative.
pub fn hess_solve(ctx: &HessianContext, t: &SparseSymMatrix) -> Result<SparseSymMatrix, Error> {
    check_arg(ctx, t)?;
    let sym = ctx.sym();
    let pat = sym.pattern();
    let f = &ctx.factor;
    let rf = ctx.rfactors()?;

    // reverse sweep: M_jj = T_jj + 2 l^T T_col + l^T V'_j l with V'_j the
    // input blocks, then the inverted scaling K = D (V_j^{-1} M_col),
    // K_jj = D^2 M_jj
    let mut kvals = vec![0.0; pat.nnz()];
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    for &j in sym.postorder().iter().rev() {
        let set = sym.colset(j);
        let vp = if sym.parent(j).is_some() {
            stack.pop(j)
        } else {
            DenseMat::zeros(set.len(), set.len())
        };
        let l = f.lcol(j);
        let d = f.diag()[j];
        let tcol_all = t.col_values(j);
        let t_jj = tcol_all[0];
        let t_col = &tcol_all[1..];

        let w: Vec<f64> = (0..set.len()).map(|r| dot(vp.row(r), l)).collect();
        let m_jj = t_jj + 2.0 * dot(l, t_col) + dot(l, &w);
        let m_col: Vec<f64> = (0..set.len()).map(|r| t_col[r] + w[r]).collect();

        let mut k_col = m_col;
        rf[j].upper_solve_in_place(&mut k_col);
        rf[j].upper_transpose_solve_in_place(&mut k_col);
        let krange = pat.col_range(j);
        kvals[krange.start] = d * d * m_jj;
        for (slot, v) in kvals[krange.start + 1..krange.end].iter_mut().zip(&k_col) {
            *slot = d * v;
        }

        if !sym.children(j).is_empty() {
            let mm = 1 + set.len();
            let mut front = DenseMat::zeros(mm, mm);
            front[(0, 0)] = t_jj;
            for r in 0..set.len() {
                front[(r + 1, 0)] = t_col[r];
                front[(0, r + 1)] = t_col[r];
                for c in 0..set.len() {
                    front[(r + 1, c + 1)] = vp[(r, c)];
                }
            }
            for &c in sym.children(j) {
                stack.push(c, extract(&front, sym.relidx(c)));
            }
        }
    }
    debug_assert!(stack.is_empty());

    // forward sweep undoing the factorization derivative
    let mut y = SparseSymMatrix::zeros(pat.clone());
    let mut stack = UpdateStack::with_capacity(sym.peak_stack_entries());
    for &j in sym.postorder() {
        let set = sym.colset(j);
        let m = 1 + set.len();
        let l = f.lcol(j);
        let krange = pat.col_range(j);
        let k_jj = kvals[krange.start];
        let k_col = &kvals[krange.start + 1..krange.end];

        // [[Y_jj, *], [Y_col, -U'_j]] = B + sum of children contributions,
        // B the symmetrized bordered expansion of the K column
        let mut front = DenseMat::zeros(m, m);
        front[(0, 0)] = k_jj;
        for r in 0..set.len() {
            let v = k_jj * l[r] + k_col[r];
            front[(r + 1, 0)] = v;
            front[(0, r + 1)] = v;
            for c in 0..=r {
                let b = l[r] * k_col[c] + k_col[r] * l[c] + k_jj * l[r] * l[c];
                front[(r + 1, c + 1)] = b;
                front[(c + 1, r + 1)] = b;
            }
        }
        for &c in sym.children(j).iter().rev() {
            let update = stack.pop(c);
            extend_add(&mut front, &update, sym.relidx(c));
        }

        let out = y.col_values_mut(j);
        for (t, v) in out.iter_mut().enumerate() {
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
    Ok(y)
}

/// Applies the Hessian factor `R` with `hess_apply = R^adj ∘ R`: the
/// forward differentiation sweep followed by the symmetric half of the
/// middle scaling, `W_jj = K_jj / D_jj`, `W_col = R_j^T K_col / sqrt(D_jj)`.
pub fn hess_factor_apply(
    ctx: &HessianContext,
    y: &SparseSymMatrix,
) -> Result<SparseSymMatrix, Error> {
    check_arg(ctx, y)?;
    let rf = ctx.rfactors()?;
    let kvals = linearized_factor_sweep(ctx, y, None);
    Ok(scale_factor_half(ctx, rf, &kvals, None))
}

fn scale_factor_half(
    ctx: &HessianContext,
    rf: &[DenseMat],
    kvals: &[f64],
    reachable: Option<&[bool]>,
) -> SparseSymMatrix {
    let sym = ctx.sym();
    let pat = sym.pattern();
    let mut w = SparseSymMatrix::zeros(pat.clone());
    for j in 0..sym.order() {
        if reachable.is_some_and(|mask| !mask[j]) {
            continue;
        }
        let d = ctx.factor.diag()[j];
        let range = pat.col_range(j);
        let k_col = &kvals[range.start + 1..range.end];
        let scaled = upper_transpose_matvec(&rf[j], k_col);
        let out = w.col_values_mut(j);
        out[0] = kvals[range.start] / d;
        let ds = d.sqrt();
        for (slot, v) in out[1..].iter_mut().zip(&scaled) {
            *slot = v / ds;
        }
    }
    w
}

/// Applies the adjoint factor `R^adj`: the transposed middle scaling,
/// `M_jj = W_jj / D_jj`, `M_col = R_j W_col / sqrt(D_jj)`, followed by the
/// reverse differentiation sweep.
pub fn hess_factor_adjoint(
    ctx: &HessianContext,
    w: &SparseSymMatrix,
) -> Result<SparseSymMatrix, Error> {
    check_arg(ctx, w)?;
    let sym = ctx.sym();
    let pat = sym.pattern();
    let rf = ctx.rfactors()?;
    let mut mvals = vec![0.0; pat.nnz()];
    for j in 0..sym.order() {
        let d = ctx.factor.diag()[j];
        let range = pat.col_range(j);
        let w_col = &w.col_values(j)[1..];
        let scaled = upper_matvec(&rf[j], w_col);
        mvals[range.start] = w.col_values(j)[0] / d;
        let ds = d.sqrt();
        for (slot, v) in mvals[range.start + 1..range.end].iter_mut().zip(&scaled) {
            *slot = v / ds;
        }
    }
    Ok(linearized_completion_sweep(ctx, &mvals))
}

/// Result of a pruned factor application: the output matrix plus the
/// ascending list of columns the sweep actually visited. Columns outside
/// the list are structurally zero in `w`.
#[derive(Debug)]
pub struct SparseApplyResult {
    pub w: SparseSymMatrix,
    pub reachable: Vec<usize>,
}

/// [`hess_factor_apply`] for an argument with few structurally nonzero
/// columns, listed in `support`.
///
/// Vertices whose subtrees hold no supported column contribute exact
/// zeros, so the sweep prunes them and visits only the supported columns
/// and their elimination tree ancestors. Values on the visited columns
/// match the unpruned operation; all other columns stay zero.
pub fn hess_factor_apply_sparse(
    ctx: &HessianContext,
    y: &SparseSymMatrix,
    support: &[usize],
) -> Result<SparseApplyResult, Error> {
    check_arg(ctx, y)?;
    let sym = ctx.sym();
    let n = sym.order();
    let mut supported = vec![false; n];
    for &j in support {
        if j >= n {
            return Err(StructureError::InconsistentSupport { col: j }.into());
        }
        supported[j] = true;
    }
    for j in 0..n {
        if !supported[j] && y.col_values(j).iter().any(|&v| v != 0.0) {
            return Err(StructureError::InconsistentSupport { col: j }.into());
        }
    }

    // close the support under parent links
    let mut reachable = supported;
    for j in 0..n {
        if !reachable[j] {
            continue;
        }
        let mut cur = j;
        while let Some(p) = sym.parent(cur) {
            if reachable[p] {
                break;
            }
            reachable[p] = true;
            cur = p;
        }
    }

    let rf = ctx.rfactors()?;
    let kvals = linearized_factor_sweep(ctx, y, Some(&reachable));
    let w = scale_factor_half(ctx, rf, &kvals, Some(&reachable));
    let visited: Vec<usize> = (0..n).filter(|&j| reachable[j]).collect();
    Ok(SparseApplyResult { w, reachable: visited })
}

/// Gram matrix of a family of directions in the Hessian metric:
/// `H_ik = <A_i, hess_apply(A_k)> = <R(A_i), R(A_k)>`, assembled from one
/// pruned factor application per direction.
pub fn gram_matrix(
    ctx: &HessianContext,
    args: &[(&SparseSymMatrix, &[usize])],
) -> Result<DenseMat, Error> {
    let m = args.len();
    let mut images = Vec::with_capacity(m);
    for &(a, support) in args {
        images.push(hess_factor_apply_sparse(ctx, a, support)?.w);
    }
    let mut h = DenseMat::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let v = images[i].inner(&images[k]);
            h[(i, k)] = v;
            h[(k, i)] = v;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multifrontal::{completion, factor, product};
    use crate::oracle;
    use crate::pattern::SparsityPattern;
    use crate::symbolic::etree_only;

    fn analyze(p: SparsityPattern) -> Arc<SymbolicAnalysis> {
        Arc::new(etree_only(&Arc::new(p)).unwrap())
    }

    fn context(sym: &Arc<SymbolicAnalysis>, seed: u64) -> HessianContext {
        let x = oracle::gen_spd(sym.pattern(), seed);
        HessianContext::new(factor(&x, sym).unwrap())
    }

    fn rel_diff(a: &SparseSymMatrix, b: &SparseSymMatrix) -> f64 {
        let mut num: f64 = 0.0;
        for (x, y) in a.values().iter().zip(b.values()) {
            num = num.max((x - y).abs());
        }
        num / b.fro_norm().max(1.0)
    }

    #[test]
    fn identity_context_applies_identity() {
        let sym = analyze(oracle::test_pattern_17());
        let x = SparseSymMatrix::identity(sym.pattern().clone());
        let ctx = HessianContext::new(factor(&x, &sym).unwrap());
        let y = oracle::gen_spd(sym.pattern(), 3);
        let t = hess_apply(&ctx, &y).unwrap();
        assert!(rel_diff(&t, &y) < 1e-15);
        let ys = hess_solve(&ctx, &y).unwrap();
        assert!(rel_diff(&ys, &y) < 1e-15);
        let w = hess_factor_apply(&ctx, &y).unwrap();
        assert!(rel_diff(&w, &y) < 1e-15);
        let wa = hess_factor_adjoint(&ctx, &y).unwrap();
        assert!(rel_diff(&wa, &y) < 1e-15);
    }

    #[test]
    fn apply_matches_dense_oracle() {
        let sym = analyze(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 11);
        let ctx = HessianContext::new(factor(&x, &sym).unwrap());
        let y = oracle::gen_spd(sym.pattern(), 12);
        let t = hess_apply(&ctx, &y).unwrap();
        let want = oracle::hess_apply_dense(&x, &y).unwrap();
        assert!(rel_diff(&t, &want) < 1e-9);

        for seed in 0..4u64 {
            let sym = Arc::new(etree_only(&oracle::gen_chordal(40, 0.2, seed)).unwrap());
            let x = oracle::gen_spd(sym.pattern(), seed + 100);
            let y = oracle::gen_spd(sym.pattern(), seed + 200);
            let ctx = HessianContext::new(factor(&x, &sym).unwrap());
            let t = hess_apply(&ctx, &y).unwrap();
            let want = oracle::hess_apply_dense(&x, &y).unwrap();
            assert!(rel_diff(&t, &want) < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn apply_matches_finite_differences() {
        let sym = analyze(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 21);
        let y = oracle::gen_spd(sym.pattern(), 22);
        let ctx = HessianContext::new(factor(&x, &sym).unwrap());
        let t = hess_apply(&ctx, &y).unwrap();
        let step = oracle::default_fd_step(&x, &y);
        let fd = oracle::finite_diff_hessian(&x, &y, step).unwrap();
        assert!(rel_diff(&t, &fd) < 1e-5);
    }

    #[test]
    fn apply_is_self_adjoint_and_positive() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 31);
        let y = oracle::gen_spd(sym.pattern(), 32);
        let z = oracle::gen_completable(sym.pattern(), 33);
        let hy = hess_apply(&ctx, &y).unwrap();
        let hz = hess_apply(&ctx, &z).unwrap();
        let a = hy.inner(&z);
        let b = y.inner(&hz);
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        assert!(hy.inner(&y) > 0.0);
        assert!(hz.inner(&z) > 0.0);
    }

    #[test]
    fn solve_inverts_apply() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 41);
        let y = oracle::gen_completable(sym.pattern(), 42);
        let t = hess_apply(&ctx, &y).unwrap();
        let back = hess_solve(&ctx, &t).unwrap();
        assert!(rel_diff(&back, &y) < 1e-8);
        let forth = hess_apply(&ctx, &back).unwrap();
        assert!(rel_diff(&forth, &t) < 1e-8);
    }

    #[test]
    fn solve_matches_dense_linear_system() {
        let sym = Arc::new(etree_only(&oracle::gen_chordal(25, 0.2, 7)).unwrap());
        let x = oracle::gen_spd(sym.pattern(), 51);
        let t = oracle::gen_completable(sym.pattern(), 52);
        let ctx = HessianContext::new(factor(&x, &sym).unwrap());
        let got = hess_solve(&ctx, &t).unwrap();

        let h = oracle::dense_hessian_matrix(&x).unwrap();
        let rhs = oracle::to_coords(&t);
        let sol = oracle::solve_dense(&h, &rhs).unwrap();
        let want = oracle::from_coords(sym.pattern(), &sol);
        assert!(rel_diff(&got, &want) < 1e-8);
    }

    #[test]
    fn factor_halves_compose_to_the_hessian() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 61);
        let y = oracle::gen_completable(sym.pattern(), 62);
        let w = hess_factor_apply(&ctx, &y).unwrap();
        let composed = hess_factor_adjoint(&ctx, &w).unwrap();
        let direct = hess_apply(&ctx, &y).unwrap();
        assert!(rel_diff(&composed, &direct) < 1e-9);
        // factor norm identity <R(Y), R(Y)> = <hess_apply(Y), Y>
        let a = w.inner(&w);
        let b = direct.inner(&y);
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn factor_adjoint_pairing() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 71);
        let y = oracle::gen_completable(sym.pattern(), 72);
        let w = oracle::gen_completable(sym.pattern(), 73);
        let a = hess_factor_apply(&ctx, &y).unwrap().inner(&w);
        let b = y.inner(&hess_factor_adjoint(&ctx, &w).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn cached_factors_reproduce_the_inverse_blocks() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 81);
        let rf = ctx.rfactors().unwrap();
        let s = ctx.projected_inverse();
        for j in 0..17 {
            let set = sym.colset(j);
            let r = &rf[j];
            for a in 0..set.len() {
                for b in 0..set.len() {
                    let want = s.get(set[a], set[b]);
                    let got = (0..set.len()).map(|t| r[(a, t)] * r[(b, t)]).sum::<f64>();
                    assert!(
                        (got - want).abs() <= 1e-11 * want.abs().max(1.0),
                        "column {j} block ({a},{b})"
                    );
                }
            }
        }
    }

    #[test]
    fn from_parts_checks_consistency() {
        let sym = analyze(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 91);
        let f = factor(&x, &sym).unwrap();
        let s = crate::multifrontal::projected_inverse(&f);
        assert!(HessianContext::from_parts(f.clone(), s.clone()).is_ok());
        let mut bad = s;
        let v = bad.get(0, 0);
        bad.set(0, 0, v + 1.0);
        assert!(HessianContext::from_parts(f, bad).is_err());
    }

    #[test]
    fn sparse_apply_single_diagonal_fixture() {
        // one diagonal nonzero in column 2: the image is dense exactly on
        // the columns of the path from 2 to the root
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 101);
        let mut y = SparseSymMatrix::zeros(sym.pattern().clone());
        y.set(1, 1, 1.0);
        let res = hess_factor_apply_sparse(&ctx, &y, &[1]).unwrap();
        assert_eq!(res.reachable, vec![1, 2, 3, 4, 8, 14, 15, 16]);
        for j in 0..17 {
            let col = res.w.col_values(j);
            if res.reachable.contains(&j) {
                assert!(col.iter().all(|&v| v.abs() > 1e-14), "column {j} should be dense");
            } else {
                assert!(col.iter().all(|&v| v == 0.0), "column {j} should be zero");
            }
        }
    }

    #[test]
    fn sparse_apply_single_offdiagonal_fixture() {
        // one off-diagonal nonzero at (4,2) zero-based (3,1): the first two
        // visited columns stay partially zero, the rest fill in
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 102);
        let mut y = SparseSymMatrix::zeros(sym.pattern().clone());
        y.set(3, 1, 1.0);
        let res = hess_factor_apply_sparse(&ctx, &y, &[1]).unwrap();
        assert_eq!(res.reachable, vec![1, 2, 3, 4, 8, 14, 15, 16]);
        let w = &res.w;
        // column 1 carries only the seeded entry
        assert_eq!(w.get(1, 1), 0.0);
        assert_eq!(w.get(2, 1), 0.0);
        assert!(w.get(3, 1).abs() > 1e-14);
        // column 2 misses its diagonal
        assert_eq!(w.get(2, 2), 0.0);
        assert!(w.get(3, 2).abs() > 1e-14);
        assert!(w.get(4, 2).abs() > 1e-14);
        assert!(w.get(14, 2).abs() > 1e-14);
        // later columns on the path are dense
        for &j in &[3usize, 4, 8, 14, 15, 16] {
            assert!(w.col_values(j).iter().all(|&v| v.abs() > 1e-14), "column {j}");
        }
    }

    #[test]
    fn sparse_apply_agrees_with_dense_path() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 103);
        let mut y = SparseSymMatrix::zeros(sym.pattern().clone());
        y.set(5, 5, 0.7);
        y.set(8, 6, -0.3);
        let res = hess_factor_apply_sparse(&ctx, &y, &[5, 6]).unwrap();
        let full = hess_factor_apply(&ctx, &y).unwrap();
        for j in 0..17 {
            if res.reachable.contains(&j) {
                for (a, b) in res.w.col_values(j).iter().zip(full.col_values(j)) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            } else {
                assert!(res.w.col_values(j).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn sparse_apply_of_zero_visits_nothing() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 104);
        let y = SparseSymMatrix::zeros(sym.pattern().clone());
        let res = hess_factor_apply_sparse(&ctx, &y, &[]).unwrap();
        assert!(res.reachable.is_empty());
        assert!(res.w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sparse_apply_rejects_bad_support() {
        let sym = analyze(oracle::test_pattern_17());
        let ctx = context(&sym, 105);
        let mut y = SparseSymMatrix::zeros(sym.pattern().clone());
        y.set(5, 5, 1.0);
        let err = hess_factor_apply_sparse(&ctx, &y, &[2]).unwrap_err();
        assert!(matches!(
            err,
            Error::Structure(StructureError::InconsistentSupport { col: 5 })
        ));
        let err = hess_factor_apply_sparse(&ctx, &y, &[99]).unwrap_err();
        assert!(matches!(
            err,
            Error::Structure(StructureError::InconsistentSupport { col: 99 })
        ));
    }

    #[test]
    fn gram_matrix_on_diagonal_pattern() {
        let p = SparsityPattern::from_entries(4, Vec::<(usize, usize)>::new()).unwrap();
        let sym = analyze(p);
        let mut x = SparseSymMatrix::zeros(sym.pattern().clone());
        for j in 0..4 {
            x.set(j, j, (j + 1) as f64);
        }
        let ctx = HessianContext::new(factor(&x, &sym).unwrap());
        let mut dirs = Vec::new();
        for j in 0..4 {
            let mut a = SparseSymMatrix::zeros(sym.pattern().clone());
            a.set(j, j, 1.0);
            dirs.push((a, vec![j]));
        }
        let args: Vec<(&SparseSymMatrix, &[usize])> =
            dirs.iter().map(|(a, s)| (a, s.as_slice())).collect();
        let h = gram_matrix(&ctx, &args).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                let want = if i == k {
                    1.0 / (((i + 1) * (i + 1)) as f64)
                } else {
                    0.0
                };
                assert!((h[(i, k)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gram_matrix_matches_dense_oracle() {
        let sym = analyze(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 111);
        let ctx = HessianContext::new(factor(&x, &sym).unwrap());
        let all: Vec<usize> = (0..17).collect();
        let dirs: Vec<SparseSymMatrix> =
            (0..5).map(|k| oracle::gen_completable(sym.pattern(), 120 + k)).collect();
        let args: Vec<(&SparseSymMatrix, &[usize])> =
            dirs.iter().map(|a| (a, all.as_slice())).collect();
        let h = gram_matrix(&ctx, &args).unwrap();

        let hmat = oracle::dense_hessian_matrix(&x).unwrap();
        for i in 0..5 {
            let vi = oracle::to_coords(&dirs[i]);
            for k in 0..5 {
                let vk = oracle::to_coords(&dirs[k]);
                let mut want = 0.0;
                for (p, vip) in vi.iter().enumerate() {
                    want += vip * dot(hmat.row(p), &vk);
                }
                assert!(
                    (h[(i, k)] - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "entry ({i},{k})"
                );
            }
        }
        // single direction X: <R(X), R(X)> = <S, X>
        let args: Vec<(&SparseSymMatrix, &[usize])> = vec![(&x, all.as_slice())];
        let h1 = gram_matrix(&ctx, &args).unwrap();
        let want = ctx.projected_inverse().inner(&x);
        assert!((h1[(0, 0)] - want).abs() <= 1e-9 * want.abs());
    }

    #[test]
    fn dual_hessian_matches_completion_jacobian() {
        // with X̂ = completion(S), the inverse Hessian at X̂ is the negated
        // directional derivative of S -> completion(S) as matrices
        let sym = Arc::new(etree_only(&oracle::gen_chordal(12, 0.25, 5)).unwrap());
        let s = oracle::gen_completable(sym.pattern(), 131);
        let t = oracle::gen_completable(sym.pattern(), 132);
        let xhat = completion(&s, &sym).unwrap();
        let ctx = HessianContext::new(xhat);
        let got = hess_solve(&ctx, &t).unwrap();

        let h = 1e-5 * s.fro_norm() / t.fro_norm();
        let probe = |sign: f64| -> SparseSymMatrix {
            let mut sp = s.clone();
            for (v, dv) in sp.values_mut().iter_mut().zip(t.values()) {
                *v += sign * h * dv;
            }
            product(&completion(&sp, &sym).unwrap())
        };
        let plus = probe(1.0);
        let minus = probe(-1.0);
        let mut fd = plus;
        for (v, m) in fd.values_mut().iter_mut().zip(minus.values()) {
            *v = -(*v - m) / (2.0 * h);
        }
        assert!(rel_diff(&got, &fd) < 1e-4);
    }
}
