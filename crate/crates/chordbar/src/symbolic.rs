//! Symbolic analysis of sparsity patterns: fill computation under a given
//! elimination ordering, elimination trees and forests, postorderings, and
//! the index maps used to embed update matrices into frontal matrices.

use std::sync::Arc;

use crate::dense::DenseMat;
use crate::error::StructureError;
use crate::pattern::SparsityPattern;

/// Structural data shared by every numeric recursion on a filled pattern.
///
/// Holds the filled pattern itself, the elimination forest (`parent`,
/// `children`), a postordering with children visited in increasing vertex
/// order, the below-diagonal column sets, and per-vertex relative index
/// maps that locate a vertex's column set inside its parent's frontal
/// frame. Immutable once built; wrap in `Arc` and share freely.
#[derive(Debug)]
pub struct SymbolicAnalysis {
    pattern: Arc<SparsityPattern>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    postorder: Vec<usize>,
    degrees: Vec<usize>,
    relidx: Vec<Vec<usize>>,
    peak_stack_entries: usize,
    peak_front_scalars: usize,
}

impl SymbolicAnalysis {
    /// The filled pattern the analysis describes.
    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn order(&self) -> usize {
        self.pattern.order()
    }

    /// Elimination-forest parent of `j`: the smallest below-diagonal row
    /// index of column `j`, or `None` for roots.
    pub fn parent(&self, j: usize) -> Option<usize> {
        self.parent[j]
    }

    /// Children of `j` in increasing vertex order.
    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    /// Postordering of the forest: every vertex appears after all of its
    /// descendants, children subtrees visited in increasing root order.
    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    /// Below-diagonal row indices of column `j` in the filled pattern.
    pub fn colset(&self, j: usize) -> &[usize] {
        self.pattern.below_diag(j)
    }

    /// Monotone degree of every vertex: the size of its below-diagonal
    /// column set. Along any leaf-to-root path the degree drops by at most
    /// one per step.
    pub fn monotone_degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, j: usize) -> usize {
        self.degrees[j]
    }

    /// Positions of the column set of `j` inside the parent's frontal
    /// frame: `pattern.col(parent)[relidx(j)[t]] == colset(j)[t]`.
    /// Empty for roots.
    pub fn relidx(&self, j: usize) -> &[usize] {
        &self.relidx[j]
    }

    /// Peak number of update matrices simultaneously alive during a
    /// postorder sweep, computed symbolically.
    pub fn peak_stack_entries(&self) -> usize {
        self.peak_stack_entries
    }

    /// Peak scalar storage (update matrices plus the active front) of a
    /// postorder sweep, in `f64` units.
    pub fn peak_front_scalars(&self) -> usize {
        self.peak_front_scalars
    }

    fn build(pattern: Arc<SparsityPattern>) -> Self {
        let n = pattern.order();
        let mut parent = vec![None; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut degrees = vec![0usize; n];
        for j in 0..n {
            let below = pattern.below_diag(j);
            degrees[j] = below.len();
            if let Some(&p) = below.first() {
                parent[j] = Some(p);
                children[p].push(j);
            }
        }

        // Iterative depth-first postorder, children in increasing order.
        let mut postorder = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for r in 0..n {
            if parent[r].is_some() {
                continue;
            }
            stack.push((r, 0));
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < children[v].len() {
                    let c = children[v][*next];
                    *next += 1;
                    stack.push((c, 0));
                } else {
                    postorder.push(v);
                    stack.pop();
                }
            }
        }
        debug_assert_eq!(postorder.len(), n);

        // Relative indices of each column set inside the parent frame.
        let mut relidx: Vec<Vec<usize>> = vec![Vec::new(); n];
        for j in 0..n {
            if let Some(p) = parent[j] {
                let frame = pattern.col(p);
                let set = pattern.below_diag(j);
                let mut map = Vec::with_capacity(set.len());
                let mut t = 0;
                for &r in set {
                    while t < frame.len() && frame[t] < r {
                        t += 1;
                    }
                    debug_assert!(t < frame.len() && frame[t] == r, "column set escapes parent frame");
                    map.push(t);
                }
                relidx[j] = map;
            }
        }

        // Symbolic dry run of the update stack to size the numeric sweeps.
        let mut live_entries = 0usize;
        let mut live_scalars = 0usize;
        let mut peak_entries = 0usize;
        let mut peak_scalars = 0usize;
        for &j in &postorder {
            let front = (1 + degrees[j]) * (1 + degrees[j]);
            peak_scalars = peak_scalars.max(live_scalars + front);
            peak_entries = peak_entries.max(live_entries + 1);
            for &c in &children[j] {
                live_entries -= 1;
                live_scalars -= degrees[c] * degrees[c];
            }
            if parent[j].is_some() {
                live_entries += 1;
                live_scalars += degrees[j] * degrees[j];
            }
        }

        SymbolicAnalysis {
            pattern,
            parent,
            children,
            postorder,
            degrees,
            relidx,
            peak_stack_entries: peak_entries,
            peak_front_scalars: peak_scalars,
        }
    }
}

fn validate_order(n: usize, order: &[usize]) -> Result<Vec<usize>, StructureError> {
    if order.len() != n {
        return Err(StructureError::InvalidPermutation);
    }
    let mut inverse = vec![usize::MAX; n];
    for (pos, &v) in order.iter().enumerate() {
        if v >= n || inverse[v] != usize::MAX {
            return Err(StructureError::InvalidPermutation);
        }
        inverse[v] = pos;
    }
    Ok(inverse)
}

/// Permutes `raw` by `order` and computes the filled pattern of the
/// resulting elimination sequence, together with its full symbolic
/// analysis.
///
/// `order[k]` names the vertex of `raw` that is eliminated at step `k`;
/// entry `(i, j)` of the permuted matrix is entry `(order[i], order[j])` of
/// the original. The output pattern contains the permuted input plus all
/// fill produced by elimination in the natural order, and therefore always
/// satisfies the fill property.
pub fn fill_pattern(raw: &SparsityPattern, order: &[usize]) -> Result<SymbolicAnalysis, StructureError> {
    let n = raw.order();
    let inverse = validate_order(n, order)?;

    // Permute the below-diagonal entries.
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let pj = inverse[j];
        for &i in raw.below_diag(j) {
            let pi = inverse[i];
            let (r, c) = if pi > pj { (pi, pj) } else { (pj, pi) };
            cols[c].push(r);
        }
    }

    // Column-merge symbolic elimination: the row set of column j is its own
    // entries plus the propagated sets of all elimination-tree children.
    let mut parent = vec![usize::MAX; n];
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut rowsets: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut mark = vec![usize::MAX; n];
    for j in 0..n {
        let mut set = Vec::new();
        for &i in &cols[j] {
            if mark[i] != j {
                mark[i] = j;
                set.push(i);
            }
        }
        for &k in &kids[j] {
            for &i in &rowsets[k] {
                if i != j && mark[i] != j {
                    mark[i] = j;
                    set.push(i);
                }
            }
        }
        set.sort_unstable();
        if let Some(&p) = set.first() {
            parent[j] = p;
            kids[p].push(j);
        }
        rowsets[j] = set;
    }

    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowidx = Vec::new();
    colptr.push(0);
    for (j, set) in rowsets.iter().enumerate() {
        rowidx.push(j);
        rowidx.extend_from_slice(set);
        colptr.push(rowidx.len());
    }
    let filled = SparsityPattern::from_parts(n, colptr, rowidx).expect("fill produced a valid pattern");
    Ok(SymbolicAnalysis::build(Arc::new(filled)))
}

/// Builds the symbolic analysis of a pattern that is already filled,
/// verifying the fill property on the way.
///
/// On a violation, reports a witness triple `row > mid > col` where
/// `(row, col)` and `(mid, col)` are present but `(row, mid)` is not.
pub fn etree_only(filled: &Arc<SparsityPattern>) -> Result<SymbolicAnalysis, StructureError> {
    let n = filled.order();
    for k in 0..n {
        let set = filled.below_diag(k);
        if set.len() < 2 {
            continue;
        }
        let j = set[0];
        for &i in &set[1..] {
            if !filled.contains(i, j) {
                return Err(StructureError::NotChordal { row: i, mid: j, col: k });
            }
        }
    }
    Ok(SymbolicAnalysis::build(filled.clone()))
}

/// Adds `update` into `front` at the rows and columns selected by `map`:
/// `front[map[r], map[c]] += update[r, c]`.
pub fn extend_add(front: &mut DenseMat, update: &DenseMat, map: &[usize]) {
    let m = update.rows();
    assert_eq!(m, update.cols());
    assert_eq!(m, map.len());
    for r in 0..m {
        let fr = map[r];
        let urow = update.row(r);
        let frow = front.row_mut(fr);
        for c in 0..m {
            frow[map[c]] += urow[c];
        }
    }
}

/// Extracts the principal submatrix of `big` selected by `map`:
/// `out[r, c] = big[map[r], map[c]]`.
pub fn extract(big: &DenseMat, map: &[usize]) -> DenseMat {
    let m = map.len();
    let mut out = DenseMat::zeros(m, m);
    for r in 0..m {
        let brow = big.row(map[r]);
        let orow = out.row_mut(r);
        for c in 0..m {
            orow[c] = brow[map[c]];
        }
    }
    out
}
