//! Block versions of factorization, projected inverse, and completion,
//! sweeping a clique tree instead of the elimination tree.
//!
//! Each clique contributes one frontal matrix indexed by its frame, the
//! new vertices followed by the ancestor set. The scalar pivot `D_jj`
//! becomes a dense block `D_{new,new}`, the scaled subcolumn becomes a
//! rectangular block `L_{anc,new}`, and the dominant work per clique is a
//! matrix-matrix product. One front per clique replaces one front per
//! vertex, so the assembly counter equals the clique count.
//!
//! New-sets need not be contiguous vertex ranges: fronts gather from and
//! scatter to the sparse storage through the frame index lists, and update
//! matrices move between cliques through the same relative index maps the
//! scalar sweeps use.

use std::sync::Arc;

use crate::chordal::CliqueForest;
use crate::dense::{delete_rows_retriangularize, gemm_nn, gemm_nt, gemm_tn, DenseMat};
use crate::error::{Error, NumericError, StructureError};
use crate::multifrontal::{check_pattern, pivot_floor, Counters, UpdateStack, PIVOT_REL_FLOOR};
use crate::pattern::SparseSymMatrix;
use crate::symbolic::{extend_add, extract, SymbolicAnalysis};

/// Factors `X = L D L^T` with block-diagonal `D`: per clique a symmetric
/// positive definite block `D_{new,new}` and a rectangular block
/// `L_{anc,new}`, with `L_{new,new} = I` implicit.
#[derive(Debug)]
pub struct BlockCholeskyFactor {
    sym: Arc<SymbolicAnalysis>,
    cf: Arc<CliqueForest>,
    dblocks: Vec<DenseMat>,
    dfacts: Vec<DenseMat>,
    lblocks: Vec<DenseMat>,
}

impl BlockCholeskyFactor {
    pub fn sym(&self) -> &Arc<SymbolicAnalysis> {
        &self.sym
    }

    pub fn forest(&self) -> &Arc<CliqueForest> {
        &self.cf
    }

    pub fn order(&self) -> usize {
        self.sym.order()
    }

    /// The diagonal block `D_{new(c),new(c)}`.
    pub fn dblock(&self, c: usize) -> &DenseMat {
        &self.dblocks[c]
    }

    /// The subdiagonal block `L_{anc(c),new(c)}`.
    pub fn lblock(&self, c: usize) -> &DenseMat {
        &self.lblocks[c]
    }

    /// Solves `D_{new(c),new(c)} x = b` in place.
    fn dsolve(&self, c: usize, x: &mut [f64]) {
        self.dfacts[c].ldl_solve_in_place(x);
    }

    /// The explicit inverse of the block `D_{new(c),new(c)}`.
    fn dinverse(&self, c: usize) -> DenseMat {
        let nn = self.dblocks[c].rows();
        let mut inv = DenseMat::zeros(nn, nn);
        let mut col = vec![0.0; nn];
        for t in 0..nn {
            col.fill(0.0);
            col[t] = 1.0;
            self.dsolve(c, &mut col);
            for r in 0..nn {
                inv[(r, t)] = col[r];
            }
        }
        inv.symmetrize_from_lower();
        inv
    }
}

/// `log det X` from the block factor: the sum of the log pivots of the
/// diagonal blocks.
pub fn logdet(f: &BlockCholeskyFactor) -> f64 {
    let mut acc = 0.0;
    for d in &f.dfacts {
        for t in 0..d.rows() {
            acc += d[(t, t)].ln();
        }
    }
    acc
}

fn check_forest(cf: &CliqueForest, sym: &SymbolicAnalysis) -> Result<(), Error> {
    let mismatch: Error =
        StructureError::Mismatch("clique forest does not match the analysis").into();
    if cf.order() != sym.order() {
        return Err(mismatch);
    }
    for c in 0..cf.len() {
        if cf.frame(c) != sym.pattern().col(cf.rep(c)) {
            return Err(mismatch);
        }
    }
    Ok(())
}

/// Gathers the columns of `m` owned by clique `c` into the lower triangle
/// of a frame-sized front. Every frame vertex in `new(c)` owns the column
/// holding the rest of the frame, so the gathered entries fill exactly the
/// blocks `X_{new,new}` (lower part) and `X_{anc,new}`.
fn gather_front(m: &SparseSymMatrix, cf: &CliqueForest, c: usize) -> DenseMat {
    let frame = cf.frame(c);
    let k = frame.len();
    let nn = cf.new_set(c).len();
    let mut front = DenseMat::zeros(k, k);
    for t in 0..nn {
        let vals = m.col_values(frame[t]);
        debug_assert_eq!(vals.len(), k - t);
        for (s, &v) in vals.iter().enumerate() {
            front[(t + s, t)] = v;
        }
    }
    front
}

/// Scatters the first `|new(c)|` columns of a frame-sized symmetric matrix
/// back into the sparse storage.
fn scatter_front(out: &mut SparseSymMatrix, front: &DenseMat, cf: &CliqueForest, c: usize) {
    let frame = cf.frame(c);
    let nn = cf.new_set(c).len();
    for t in 0..nn {
        let vals = out.col_values_mut(frame[t]);
        debug_assert_eq!(vals.len(), frame.len() - t);
        for (s, v) in vals.iter_mut().enumerate() {
            *v = front[(t + s, t)];
        }
    }
}

/// Copies the lower triangle of the leading `nn` rows and columns into a
/// symmetric block.
fn leading_block(front: &DenseMat, nn: usize) -> DenseMat {
    let mut b = DenseMat::zeros(nn, nn);
    for r in 0..nn {
        for c in 0..=r {
            b[(r, c)] = front[(r, c)];
            b[(c, r)] = front[(r, c)];
        }
    }
    b
}

/// Copies the block below the leading `nn` rows, `front[nn.., ..nn]`.
fn subdiagonal_block(front: &DenseMat, nn: usize) -> DenseMat {
    let na = front.rows() - nn;
    let mut b = DenseMat::zeros(na, nn);
    for r in 0..na {
        for c in 0..nn {
            b[(r, c)] = front[(nn + r, c)];
        }
    }
    b
}

/// Assembles the symmetric frame matrix `[[S_nn, S_an^T], [S_an, V]]`.
fn frame_matrix(snn: &DenseMat, san: &DenseMat, v: &DenseMat) -> DenseMat {
    let nn = snn.rows();
    let na = san.rows();
    let k = nn + na;
    let mut g = DenseMat::zeros(k, k);
    for r in 0..nn {
        for c in 0..nn {
            g[(r, c)] = snn[(r, c)];
        }
    }
    for r in 0..na {
        for c in 0..nn {
            g[(nn + r, c)] = san[(r, c)];
            g[(c, nn + r)] = san[(r, c)];
        }
        for c in 0..na {
            g[(nn + r, nn + c)] = v[(r, c)];
        }
    }
    g
}

/// Factors a positive definite `X = L D L^T` over the clique tree, one
/// frontal matrix per clique.
pub fn sn_factor(
    x: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
    cf: &Arc<CliqueForest>,
) -> Result<BlockCholeskyFactor, Error> {
    sn_factor_counted(x, sym, cf).map(|(f, _)| f)
}

pub fn sn_factor_counted(
    x: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
    cf: &Arc<CliqueForest>,
) -> Result<(BlockCholeskyFactor, Counters), Error> {
    check_pattern(x, sym)?;
    check_forest(cf, sym)?;
    let floor = pivot_floor(x);
    let l = cf.len();
    let mut dblocks = vec![DenseMat::zeros(0, 0); l];
    let mut dfacts = vec![DenseMat::zeros(0, 0); l];
    let mut lblocks = vec![DenseMat::zeros(0, 0); l];
    let mut stack = UpdateStack::with_capacity(cf.peak_stack_entries());
    let mut counters = Counters::default();

    for &c in cf.cpostorder() {
        let nn = cf.new_set(c).len();
        let na = cf.anc_set(c).len();
        let mut front = gather_front(x, cf, c);
        for &ch in cf.cchildren(c).iter().rev() {
            let update = stack.pop(ch);
            extend_add(&mut front, &update, cf.crelidx(ch));
        }
        counters.frontal_assemblies += 1;

        // D = F_11, L = F_21 D^{-1}, U = F_22 - L D L^T
        let d = leading_block(&front, nn);
        let mut df = d.clone();
        if let Err(t) = df.ldl_in_place(floor) {
            return Err(NumericError::NotPositiveDefinite { column: cf.new_set(c)[t] }.into());
        }
        let mut lb = DenseMat::zeros(na, nn);
        let mut row = vec![0.0; nn];
        for r in 0..na {
            row.copy_from_slice(&front.row(nn + r)[..nn]);
            df.ldl_solve_in_place(&mut row);
            lb.row_mut(r).copy_from_slice(&row);
        }
        if cf.cparent(c).is_some() {
            let mut w = DenseMat::zeros(na, nn);
            gemm_nn(1.0, &lb, &d, 0.0, &mut w);
            let mut update = DenseMat::zeros(na, na);
            for r in 0..na {
                for t in 0..=r {
                    update[(r, t)] = front[(nn + r, nn + t)];
                }
            }
            gemm_nt(-1.0, &w, &lb, 1.0, &mut update);
            update.symmetrize_from_lower();
            stack.push(c, update);
        }
        dblocks[c] = d;
        dfacts[c] = df;
        lblocks[c] = lb;
    }
    debug_assert!(stack.is_empty());
    let f = BlockCholeskyFactor { sym: sym.clone(), cf: cf.clone(), dblocks, dfacts, lblocks };
    Ok((f, counters))
}

/// Multiplies the block factors back into `X = L D L^T`, inverse to
/// [`sn_factor`].
pub fn sn_product(f: &BlockCholeskyFactor) -> SparseSymMatrix {
    sn_product_counted(f).0
}

pub fn sn_product_counted(f: &BlockCholeskyFactor) -> (SparseSymMatrix, Counters) {
    let cf = &f.cf;
    let mut x = SparseSymMatrix::zeros(f.sym.pattern().clone());
    let mut stack = UpdateStack::with_capacity(cf.peak_stack_entries());
    let mut counters = Counters::default();

    for &c in cf.cpostorder() {
        let nn = cf.new_set(c).len();
        let na = cf.anc_set(c).len();
        let k = nn + na;
        let d = &f.dblocks[c];
        let lb = &f.lblocks[c];

        // [[I], [L]] D [[I], [L]]^T = [[D, (LD)^T], [LD, L D L^T]]
        let mut w = DenseMat::zeros(na, nn);
        gemm_nn(1.0, lb, d, 0.0, &mut w);
        let mut front = DenseMat::zeros(k, k);
        for r in 0..nn {
            for t in 0..nn {
                front[(r, t)] = d[(r, t)];
            }
        }
        for r in 0..na {
            for t in 0..nn {
                front[(nn + r, t)] = w[(r, t)];
                front[(t, nn + r)] = w[(r, t)];
            }
        }
        let mut tail = DenseMat::zeros(na, na);
        gemm_nt(1.0, &w, lb, 0.0, &mut tail);
        tail.symmetrize_from_lower();
        for r in 0..na {
            for t in 0..na {
                front[(nn + r, nn + t)] = tail[(r, t)];
            }
        }
        for &ch in cf.cchildren(c).iter().rev() {
            let update = stack.pop(ch);
            extend_add(&mut front, &update, cf.crelidx(ch));
        }
        counters.frontal_assemblies += 1;

        scatter_front(&mut x, &front, cf, c);
        if cf.cparent(c).is_some() {
            let mut update = DenseMat::zeros(na, na);
            for r in 0..na {
                for t in 0..na {
                    update[(r, t)] = front[(nn + r, nn + t)];
                }
            }
            stack.push(c, update);
        }
    }
    debug_assert!(stack.is_empty());
    (x, counters)
}

/// Computes `S = P(X^{-1})` from the block factor by one reverse sweep,
/// propagating the dense blocks `V_j = S_{anc,anc}` down the clique tree.
pub fn sn_projected_inverse(f: &BlockCholeskyFactor) -> SparseSymMatrix {
    sn_projected_inverse_counted(f).0
}

pub fn sn_projected_inverse_counted(f: &BlockCholeskyFactor) -> (SparseSymMatrix, Counters) {
    let cf = &f.cf;
    let mut s = SparseSymMatrix::zeros(f.sym.pattern().clone());
    let mut stack = UpdateStack::with_capacity(cf.peak_stack_entries());
    let mut counters = Counters::default();

    for &c in cf.cpostorder().iter().rev() {
        let nn = cf.new_set(c).len();
        let na = cf.anc_set(c).len();
        let v = if cf.cparent(c).is_some() {
            stack.pop(c)
        } else {
            DenseMat::zeros(na, na)
        };
        let lb = &f.lblocks[c];

        // S_an = -V L, S_nn = D^{-1} - S_an^T L
        let mut san = DenseMat::zeros(na, nn);
        gemm_nn(-1.0, &v, lb, 0.0, &mut san);
        let mut snn = f.dinverse(c);
        gemm_tn(-1.0, &san, lb, 1.0, &mut snn);
        snn.symmetrize_from_lower();
        counters.frontal_assemblies += 1;

        let g = frame_matrix(&snn, &san, &v);
        scatter_front(&mut s, &g, cf, c);
        for &ch in cf.cchildren(c) {
            stack.push(ch, extract(&g, cf.crelidx(ch)));
        }
    }
    debug_assert!(stack.is_empty());
    (s, counters)
}

fn invert_spd_block(
    w: &DenseMat,
    tol: f64,
    err_vertices: &[usize],
) -> Result<(DenseMat, DenseMat), Error> {
    let nn = w.rows();
    let mut wf = w.clone();
    if let Err(t) = wf.ldl_in_place(tol) {
        return Err(NumericError::NoPositiveCompletion { column: err_vertices[t] }.into());
    }
    let mut d = DenseMat::zeros(nn, nn);
    let mut col = vec![0.0; nn];
    for t in 0..nn {
        col.fill(0.0);
        col[t] = 1.0;
        wf.ldl_solve_in_place(&mut col);
        for r in 0..nn {
            d[(r, t)] = col[r];
        }
    }
    d.symmetrize_from_lower();
    let mut df = d.clone();
    if let Err(t) = df.ldl_in_place(0.0) {
        return Err(NumericError::NoPositiveCompletion { column: err_vertices[t] }.into());
    }
    Ok((d, df))
}

/// Computes the block Cholesky factors of the maximum-determinant positive
/// definite completion of `S`: the `X` on the pattern with `P(X^{-1}) = S`.
pub fn sn_completion(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
    cf: &Arc<CliqueForest>,
) -> Result<BlockCholeskyFactor, Error> {
    sn_completion_counted(s, sym, cf).map(|(f, _)| f)
}

pub fn sn_completion_counted(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
    cf: &Arc<CliqueForest>,
) -> Result<(BlockCholeskyFactor, Counters), Error> {
    check_pattern(s, sym)?;
    check_forest(cf, sym)?;
    let l = cf.len();
    let mut dblocks = vec![DenseMat::zeros(0, 0); l];
    let mut dfacts = vec![DenseMat::zeros(0, 0); l];
    let mut lblocks = vec![DenseMat::zeros(0, 0); l];
    let mut stack = UpdateStack::with_capacity(cf.peak_stack_entries());
    let mut counters = Counters::default();

    for &c in cf.cpostorder().iter().rev() {
        let nn = cf.new_set(c).len();
        let na = cf.anc_set(c).len();
        let v = if cf.cparent(c).is_some() {
            stack.pop(c)
        } else {
            DenseMat::zeros(na, na)
        };
        let gathered = gather_front(s, cf, c);
        let snn = leading_block(&gathered, nn);
        let san = subdiagonal_block(&gathered, nn);

        // L_an = -V^{-1} S_an by a fresh dense factorization
        let mut lb = san.clone();
        if na > 0 {
            let mut vf = v.clone();
            let vtol = PIVOT_REL_FLOOR * vf.max_abs_diag();
            if vf.ldl_in_place(vtol).is_err() {
                return Err(NumericError::NoPositiveCompletion { column: cf.rep(c) }.into());
            }
            let mut col = vec![0.0; na];
            for t in 0..nn {
                for r in 0..na {
                    col[r] = san[(r, t)];
                }
                vf.ldl_solve_in_place(&mut col);
                for r in 0..na {
                    lb[(r, t)] = -col[r];
                }
            }
        }

        // D = (S_nn + S_an^T L_an)^{-1}
        let mut w = snn.clone();
        gemm_tn(1.0, &san, &lb, 1.0, &mut w);
        w.symmetrize_from_lower();
        let wtol = PIVOT_REL_FLOOR * snn.max_abs_diag();
        let (d, df) = invert_spd_block(&w, wtol, cf.new_set(c))?;
        counters.frontal_assemblies += 1;

        if !cf.cchildren(c).is_empty() {
            let g = frame_matrix(&snn, &san, &v);
            for &ch in cf.cchildren(c) {
                stack.push(ch, extract(&g, cf.crelidx(ch)));
            }
        }
        dblocks[c] = d;
        dfacts[c] = df;
        lblocks[c] = lb;
    }
    debug_assert!(stack.is_empty());
    let f = BlockCholeskyFactor { sym: sym.clone(), cf: cf.clone(), dblocks, dfacts, lblocks };
    Ok((f, counters))
}

/// Same result as [`sn_completion`], but propagating upper-triangular
/// factors `R_j` with `V_j = R_j R_j^T`.
///
/// Because new vertices precede ancestors in each frame, a child's block
/// `V_i` splits into a leading part drawn from `S_{new,new}` and
/// `S_{anc,new}` and a trailing part `C C^T` with `C` rows of `R_j`; the
/// child factor is assembled from the retriangularized `C`, one block
/// solve, and a dense factorization of the leading Schur complement.
pub fn sn_completion_factored(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
    cf: &Arc<CliqueForest>,
) -> Result<BlockCholeskyFactor, Error> {
    sn_completion_factored_counted(s, sym, cf).map(|(f, _)| f)
}

pub fn sn_completion_factored_counted(
    s: &SparseSymMatrix,
    sym: &Arc<SymbolicAnalysis>,
    cf: &Arc<CliqueForest>,
) -> Result<(BlockCholeskyFactor, Counters), Error> {
    check_pattern(s, sym)?;
    check_forest(cf, sym)?;
    let l = cf.len();
    let mut dblocks = vec![DenseMat::zeros(0, 0); l];
    let mut dfacts = vec![DenseMat::zeros(0, 0); l];
    let mut lblocks = vec![DenseMat::zeros(0, 0); l];
    let mut stack = UpdateStack::with_capacity(cf.peak_stack_entries());
    let mut counters = Counters::default();

    for &c in cf.cpostorder().iter().rev() {
        let nn = cf.new_set(c).len();
        let na = cf.anc_set(c).len();
        let r_j = if cf.cparent(c).is_some() {
            stack.pop(c)
        } else {
            DenseMat::zeros(na, na)
        };
        let gathered = gather_front(s, cf, c);
        let snn = leading_block(&gathered, nn);
        let san = subdiagonal_block(&gathered, nn);

        // Z = R^{-1} S_an, L_an = -R^{-T} Z, D = (S_nn - Z^T Z)^{-1}
        let mut z = san.clone();
        let mut col = vec![0.0; na];
        let mut lb = DenseMat::zeros(na, nn);
        for t in 0..nn {
            for r in 0..na {
                col[r] = z[(r, t)];
            }
            r_j.upper_solve_in_place(&mut col);
            for r in 0..na {
                z[(r, t)] = col[r];
            }
            r_j.upper_transpose_solve_in_place(&mut col);
            for r in 0..na {
                lb[(r, t)] = -col[r];
            }
        }
        let mut w = snn.clone();
        gemm_tn(-1.0, &z, &z, 1.0, &mut w);
        w.symmetrize_from_lower();
        let wtol = PIVOT_REL_FLOOR * snn.max_abs_diag();
        let (d, df) = invert_spd_block(&w, wtol, cf.new_set(c))?;
        counters.frontal_assemblies += 1;

        // child factors from the partitioned frame: positions below nn
        // keep rows of R_j, leading positions border them
        for &ch in cf.cchildren(c) {
            let crel = cf.crelidx(ch);
            let split = crel.partition_point(|&p| p < nn);
            let lead = &crel[..split];
            let keep: Vec<usize> = crel[split..].iter().map(|&p| p - nn).collect();
            let (rt, rots) = delete_rows_retriangularize(&r_j, &keep);
            counters.retri_rotations += rots;

            // Y = R^{-1} B with B the kept rows of S_an at leading columns
            let mut y = DenseMat::zeros(keep.len(), lead.len());
            for (bc, &p) in lead.iter().enumerate() {
                for (br, &q) in keep.iter().enumerate() {
                    y[(br, bc)] = san[(q, p)];
                }
            }
            let mut ycol = vec![0.0; keep.len()];
            for t in 0..lead.len() {
                for r in 0..keep.len() {
                    ycol[r] = y[(r, t)];
                }
                rt.upper_solve_in_place(&mut ycol);
                for r in 0..keep.len() {
                    y[(r, t)] = ycol[r];
                }
            }

            // leading Schur complement A - Y^T Y = R~ R~^T
            let mut a = DenseMat::zeros(lead.len(), lead.len());
            for (br, &p) in lead.iter().enumerate() {
                for (bc, &q) in lead.iter().enumerate() {
                    a[(br, bc)] = snn[(p, q)];
                }
            }
            gemm_tn(-1.0, &y, &y, 1.0, &mut a);
            a.symmetrize_from_lower();
            let rtilde = match a.factor_upper_ut(0.0) {
                Ok(r) => r,
                Err(_) => {
                    return Err(NumericError::NumericalBreakdown { column: cf.rep(ch) }.into());
                }
            };

            let m = lead.len() + keep.len();
            let mut rc = DenseMat::zeros(m, m);
            for r in 0..lead.len() {
                for t in r..lead.len() {
                    rc[(r, t)] = rtilde[(r, t)];
                }
                for t in 0..keep.len() {
                    rc[(r, lead.len() + t)] = y[(t, r)];
                }
            }
            for r in 0..keep.len() {
                for t in r..keep.len() {
                    rc[(lead.len() + r, lead.len() + t)] = rt[(r, t)];
                }
            }
            stack.push(ch, rc);
        }
        dblocks[c] = d;
        dfacts[c] = df;
        lblocks[c] = lb;
    }
    debug_assert!(stack.is_empty());
    let f = BlockCholeskyFactor { sym: sym.clone(), cf: cf.clone(), dblocks, dfacts, lblocks };
    Ok((f, counters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{clique_tree, CliqueForest, PickRule};
    use crate::multifrontal::{completion, factor, product, projected_inverse};
    use crate::oracle;
    use crate::symbolic::etree_only;

    fn setup(pattern: crate::pattern::SparsityPattern) -> (Arc<SymbolicAnalysis>, Arc<CliqueForest>) {
        let sym = Arc::new(etree_only(&Arc::new(pattern)).unwrap());
        let cf = Arc::new(clique_tree(&sym, PickRule::default()));
        (sym, cf)
    }

    fn rel_diff(a: &SparseSymMatrix, b: &SparseSymMatrix) -> f64 {
        let mut num: f64 = 0.0;
        for (x, y) in a.values().iter().zip(b.values()) {
            num = num.max((x - y).abs());
        }
        num / b.fro_norm().max(1.0)
    }

    #[test]
    fn identity_factors_trivially() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let x = SparseSymMatrix::identity(sym.pattern().clone());
        let f = sn_factor(&x, &sym, &cf).unwrap();
        for c in 0..cf.len() {
            let d = f.dblock(c);
            for r in 0..d.rows() {
                for t in 0..d.cols() {
                    let want = if r == t { 1.0 } else { 0.0 };
                    assert_eq!(d[(r, t)], want);
                }
            }
            assert_eq!(f.lblock(c).max_abs(), 0.0);
        }
        let s = sn_projected_inverse(&f);
        assert!(rel_diff(&s, &x) < 1e-15);
        let back = sn_completion(&x, &sym, &cf).unwrap();
        assert!(rel_diff(&sn_product(&back), &x) < 1e-15);
        assert!((logdet(&f)).abs() < 1e-15);
    }

    #[test]
    fn factor_product_roundtrip() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 7);
        let f = sn_factor(&x, &sym, &cf).unwrap();
        assert!(rel_diff(&sn_product(&f), &x) < 1e-12);

        for seed in 0..4u64 {
            let pat = oracle::gen_chordal(60, 0.15, seed);
            let sym = Arc::new(etree_only(&pat).unwrap());
            let cf = Arc::new(clique_tree(&sym, PickRule::default()));
            let x = oracle::gen_spd(sym.pattern(), 50 + seed);
            let f = sn_factor(&x, &sym, &cf).unwrap();
            assert!(rel_diff(&sn_product(&f), &x) < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn both_partitions_reconstruct_the_same_matrix() {
        let sym = Arc::new(etree_only(&Arc::new(oracle::test_pattern_17())).unwrap());
        let x = oracle::gen_spd(sym.pattern(), 17);
        let scalar = product(&factor(&x, &sym).unwrap());
        for rule in [PickRule::MaxDegreeEligible, PickRule::FirstEligible] {
            let cf = Arc::new(clique_tree(&sym, rule));
            let f = sn_factor(&x, &sym, &cf).unwrap();
            assert!(rel_diff(&sn_product(&f), &scalar) < 1e-12);
        }
    }

    #[test]
    fn band_factor_assembles_once_per_clique() {
        let pat = Arc::new(oracle::band_pattern(1000, 20));
        let sym = Arc::new(etree_only(&pat).unwrap());
        let cf = Arc::new(clique_tree(&sym, PickRule::default()));
        let x = oracle::gen_spd(sym.pattern(), 3);
        let (f, counters) = sn_factor_counted(&x, &sym, &cf).unwrap();
        assert_eq!(counters.frontal_assemblies, cf.len() as u64);
        assert!(cf.len() <= 1000);
        assert!(rel_diff(&sn_product(&f), &x) < 1e-11);
    }

    #[test]
    fn projected_inverse_agrees_with_scalar_and_dense() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 23);
        let f = sn_factor(&x, &sym, &cf).unwrap();
        let s = sn_projected_inverse(&f);
        let scalar = projected_inverse(&factor(&x, &sym).unwrap());
        assert!(rel_diff(&s, &scalar) < 1e-12);

        let pat = oracle::gen_chordal(200, 0.05, 9);
        let sym = Arc::new(etree_only(&pat).unwrap());
        let cf = Arc::new(clique_tree(&sym, PickRule::default()));
        let x = oracle::gen_spd(sym.pattern(), 29);
        let f = sn_factor(&x, &sym, &cf).unwrap();
        let s = sn_projected_inverse(&f);
        let want = oracle::projected_inverse_dense(&x).unwrap();
        assert!(rel_diff(&s, &want) < 1e-10);
    }

    #[test]
    fn completion_agrees_with_scalar_and_inverts_projection() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let s = oracle::gen_completable(sym.pattern(), 31);
        let f = sn_completion(&s, &sym, &cf).unwrap();
        let xhat = sn_product(&f);
        let scalar = product(&completion(&s, &sym).unwrap());
        assert!(rel_diff(&xhat, &scalar) < 1e-11);
        let back = sn_projected_inverse(&f);
        assert!(rel_diff(&back, &s) < 1e-9);

        for seed in 0..3u64 {
            let pat = oracle::gen_chordal(50, 0.2, 40 + seed);
            let sym = Arc::new(etree_only(&pat).unwrap());
            let cf = Arc::new(clique_tree(&sym, PickRule::default()));
            let s = oracle::gen_completable(sym.pattern(), 60 + seed);
            let f = sn_completion(&s, &sym, &cf).unwrap();
            let scalar = product(&completion(&s, &sym).unwrap());
            assert!(rel_diff(&sn_product(&f), &scalar) < 1e-11, "seed {seed}");
        }
    }

    #[test]
    fn factored_completion_matches_plain() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let s = oracle::gen_completable(sym.pattern(), 43);
        let plain = sn_completion(&s, &sym, &cf).unwrap();
        let factored = sn_completion_factored(&s, &sym, &cf).unwrap();
        for c in 0..cf.len() {
            assert!(plain.dblock(c).diff_norm(factored.dblock(c)) < 1e-11);
            assert!(plain.lblock(c).diff_norm(factored.lblock(c)) < 1e-11);
        }

        let pat = oracle::gen_chordal(80, 0.1, 44);
        let sym = Arc::new(etree_only(&pat).unwrap());
        let cf = Arc::new(clique_tree(&sym, PickRule::default()));
        let s = oracle::gen_completable(sym.pattern(), 45);
        let plain = sn_product(&sn_completion(&s, &sym, &cf).unwrap());
        let factored = sn_product(&sn_completion_factored(&s, &sym, &cf).unwrap());
        assert!(rel_diff(&factored, &plain) < 1e-11);
    }

    #[test]
    fn arrow_pattern_needs_no_rotations() {
        let pat = Arc::new(oracle::arrow_pattern(120, 4));
        let sym = Arc::new(etree_only(&pat).unwrap());
        let cf = Arc::new(clique_tree(&sym, PickRule::default()));
        let s = oracle::gen_completable(sym.pattern(), 5);
        let (_, counters) = sn_completion_factored_counted(&s, &sym, &cf).unwrap();
        assert_eq!(counters.retri_rotations, 0);

        let band = Arc::new(oracle::band_pattern(60, 6));
        let sym = Arc::new(etree_only(&band).unwrap());
        let cf = Arc::new(clique_tree(&sym, PickRule::default()));
        let s = oracle::gen_completable(sym.pattern(), 6);
        let (_, counters) = sn_completion_factored_counted(&s, &sym, &cf).unwrap();
        assert!(counters.retri_rotations > 0);
    }

    #[test]
    fn singleton_forest_reproduces_scalar_sweeps() {
        let sym = Arc::new(etree_only(&Arc::new(oracle::test_pattern_17())).unwrap());
        let cf = Arc::new(CliqueForest::singletons(&sym));
        assert_eq!(cf.len(), 17);
        let x = oracle::gen_spd(sym.pattern(), 71);
        let scalar = factor(&x, &sym).unwrap();
        let block = sn_factor(&x, &sym, &cf).unwrap();
        for j in 0..17 {
            let c = cf.clique_of(j);
            let dd = (block.dblock(c)[(0, 0)] - scalar.diag()[j]).abs();
            assert!(dd <= 1e-14 * scalar.diag()[j], "diag {j}");
            for (r, (a, b)) in block
                .lblock(c)
                .data()
                .iter()
                .zip(scalar.lcol(j))
                .enumerate()
            {
                assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "lcol {j} row {r}");
            }
        }

        let s_block = sn_projected_inverse(&block);
        let s_scalar = projected_inverse(&scalar);
        assert!(rel_diff(&s_block, &s_scalar) < 1e-14);

        let comp_scalar = completion(&s_scalar, &sym).unwrap();
        let comp_block = sn_completion(&s_scalar, &sym, &cf).unwrap();
        assert!(rel_diff(&sn_product(&comp_block), &product(&comp_scalar)) < 1e-14);

        let (fact_scalar, cnt_s) = crate::multifrontal::completion_factored_counted(&s_scalar, &sym).unwrap();
        let (fact_block, cnt_b) = sn_completion_factored_counted(&s_scalar, &sym, &cf).unwrap();
        assert!(rel_diff(&sn_product(&fact_block), &product(&fact_scalar)) < 1e-14);
        assert_eq!(cnt_s.retri_rotations, cnt_b.retri_rotations);
    }

    #[test]
    fn logdet_matches_scalar_factor() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let x = oracle::gen_spd(sym.pattern(), 81);
        let block = sn_factor(&x, &sym, &cf).unwrap();
        let scalar = factor(&x, &sym).unwrap();
        let a = logdet(&block);
        let b = crate::multifrontal::logdet(&scalar);
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn indefinite_matrix_reports_failing_column() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let mut x = oracle::gen_spd(sym.pattern(), 91);
        x.set(5, 5, -4.0);
        let err = sn_factor(&x, &sym, &cf).unwrap_err();
        assert!(matches!(
            err,
            Error::Numeric(NumericError::NotPositiveDefinite { column: 5 })
        ));
    }

    #[test]
    fn non_completable_matrix_is_rejected() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let mut s = oracle::gen_completable(sym.pattern(), 92);
        for j in 0..17 {
            let v = s.get(j, j);
            s.set(j, j, -v);
        }
        assert!(sn_completion(&s, &sym, &cf).is_err());
    }

    #[test]
    fn mismatched_pattern_is_rejected() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let other = Arc::new(oracle::band_pattern(17, 2));
        let x = SparseSymMatrix::identity(other);
        assert!(sn_factor(&x, &sym, &cf).is_err());
        let sym_band = Arc::new(etree_only(&Arc::new(oracle::band_pattern(17, 2))).unwrap());
        let x2 = SparseSymMatrix::identity(sym_band.pattern().clone());
        assert!(sn_factor(&x2, &sym_band, &cf).is_err());
    }

    #[test]
    fn completion_assemblies_equal_clique_count() {
        let (sym, cf) = setup(oracle::test_pattern_17());
        let s = oracle::gen_completable(sym.pattern(), 93);
        let (_, c1) = sn_completion_counted(&s, &sym, &cf).unwrap();
        assert_eq!(c1.frontal_assemblies, cf.len() as u64);
        let f = sn_factor(&oracle::gen_spd(sym.pattern(), 94), &sym, &cf).unwrap();
        let (_, c2) = sn_projected_inverse_counted(&f);
        assert_eq!(c2.frontal_assemblies, cf.len() as u64);
    }
}
