//! Supernode partitions and clique trees.
//!
//! For a filled pattern every index set `I'_j = {j} ∪ I_j` induces a
//! complete subgraph, and the maximal ones are the cliques of the graph.
//! Merging each vertex into the supernode of a child whose index set
//! allows it (the Pothen-Sun construction) partitions the vertices into
//! supernodes `new(j)`, one per clique, and links the cliques into a
//! forest. The block algorithms sweep this forest the way the scalar
//! algorithms sweep the elimination tree.

use std::fmt;

use crate::symbolic::SymbolicAnalysis;

/// Child-selection rule for the clique tree construction. When several
/// children of a vertex are eligible to absorb it, the partitions differ;
/// all choices produce valid clique trees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PickRule {
    /// Among eligible children pick one with the largest column count,
    /// breaking ties toward the smallest vertex.
    #[default]
    MaxDegreeEligible,
    /// The first eligible child when scanning children from the largest
    /// vertex downward.
    FirstEligible,
}

/// A supernode partition together with its clique forest.
///
/// Cliques are numbered `0..len()` in increasing order of their
/// representative vertices. Each clique `c` owns the vertices `new_set(c)`
/// (a prefix of its sorted frame) and sees the ancestor vertices
/// `anc_set(c)` (the suffix), which are a subset of the parent clique's
/// frame.
#[derive(Clone, Debug)]
pub struct CliqueForest {
    n: usize,
    reps: Vec<usize>,
    snode: Vec<usize>,
    clique_of: Vec<usize>,
    new_sets: Vec<Vec<usize>>,
    anc_sets: Vec<Vec<usize>>,
    frames: Vec<Vec<usize>>,
    first_anc: Vec<Option<usize>>,
    cparent: Vec<Option<usize>>,
    cchildren: Vec<Vec<usize>>,
    cpostorder: Vec<usize>,
    crelidx: Vec<Vec<usize>>,
    peak_stack_entries: usize,
    peak_update_scalars: usize,
}

impl CliqueForest {
    /// Number of cliques.
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Number of vertices of the underlying pattern.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Representative vertices, ascending; clique `c` has representative
    /// `reps()[c]`.
    pub fn reps(&self) -> &[usize] {
        &self.reps
    }

    pub fn rep(&self, c: usize) -> usize {
        self.reps[c]
    }

    /// Representative vertex of the supernode containing `v`.
    pub fn snode(&self, v: usize) -> usize {
        self.snode[v]
    }

    /// Clique number of the supernode containing `v`.
    pub fn clique_of(&self, v: usize) -> usize {
        self.clique_of[v]
    }

    /// Vertices owned by clique `c`, ascending.
    pub fn new_set(&self, c: usize) -> &[usize] {
        &self.new_sets[c]
    }

    /// Ancestor vertices seen by clique `c`, ascending; all larger than
    /// `max new_set(c)`.
    pub fn anc_set(&self, c: usize) -> &[usize] {
        &self.anc_sets[c]
    }

    /// Sorted clique vertex set: `new_set(c)` followed by `anc_set(c)`.
    pub fn frame(&self, c: usize) -> &[usize] {
        &self.frames[c]
    }

    /// Smallest ancestor vertex of clique `c`; `None` for roots.
    pub fn first_anc(&self, c: usize) -> Option<usize> {
        self.first_anc[c]
    }

    /// Parent clique; `None` for roots.
    pub fn cparent(&self, c: usize) -> Option<usize> {
        self.cparent[c]
    }

    pub fn cchildren(&self, c: usize) -> &[usize] {
        &self.cchildren[c]
    }

    /// Clique order visiting children before parents, one tree at a time.
    pub fn cpostorder(&self) -> &[usize] {
        &self.cpostorder
    }

    /// Positions of `anc_set(c)` inside the parent clique's frame:
    /// `frame(cparent(c))[crelidx(c)[t]] == anc_set(c)[t]`. Empty for
    /// roots.
    pub fn crelidx(&self, c: usize) -> &[usize] {
        &self.crelidx[c]
    }

    /// Most update matrices simultaneously pending in a postorder sweep.
    pub fn peak_stack_entries(&self) -> usize {
        self.peak_stack_entries
    }

    /// Most update-matrix scalars simultaneously pending in a postorder
    /// sweep.
    pub fn peak_update_scalars(&self) -> usize {
        self.peak_update_scalars
    }

    /// The trivial forest with every vertex its own clique; the block
    /// algorithms driven by it reduce to the scalar ones.
    pub fn singletons(sym: &SymbolicAnalysis) -> CliqueForest {
        let n = sym.order();
        let reps: Vec<usize> = (0..n).collect();
        let snode = reps.clone();
        let clique_of = reps.clone();
        let new_sets: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
        let anc_sets: Vec<Vec<usize>> = (0..n).map(|v| sym.colset(v).to_vec()).collect();
        let frames: Vec<Vec<usize>> = (0..n).map(|v| sym.pattern().col(v).to_vec()).collect();
        let first_anc: Vec<Option<usize>> = (0..n).map(|v| sym.parent(v)).collect();
        let cparent = first_anc.clone();
        let cchildren: Vec<Vec<usize>> = (0..n).map(|v| sym.children(v).to_vec()).collect();
        let cpostorder = sym.postorder().to_vec();
        let crelidx: Vec<Vec<usize>> = (0..n).map(|v| sym.relidx(v).to_vec()).collect();
        let (peak_stack_entries, peak_update_scalars) =
            simulate_sweep(&cpostorder, &cparent, &cchildren, &anc_sets);
        CliqueForest {
            n,
            reps,
            snode,
            clique_of,
            new_sets,
            anc_sets,
            frames,
            first_anc,
            cparent,
            cchildren,
            cpostorder,
            crelidx,
            peak_stack_entries,
            peak_update_scalars,
        }
    }

    #[cfg(test)]
    fn corrupt_cparent(&mut self, c: usize, p: Option<usize>) {
        self.cparent[c] = p;
    }
}

/// Vertices that start a supernode: `j` with `|I_j| > |I_k| - 1` for every
/// child `k` in the elimination tree. Independent of any pick rule.
pub fn representative_vertices(sym: &SymbolicAnalysis) -> Vec<usize> {
    (0..sym.order())
        .filter(|&j| {
            sym.children(j)
                .iter()
                .all(|&k| sym.degree(k) != sym.degree(j) + 1)
        })
        .collect()
}

/// Builds the supernode partition and clique forest by the Pothen-Sun
/// sweep: each vertex either starts a supernode or joins the supernode of
/// an eligible child chosen by `pick`.
pub fn clique_tree(sym: &SymbolicAnalysis, pick: PickRule) -> CliqueForest {
    let n = sym.order();
    let mut snode = vec![usize::MAX; n];
    for i in 0..n {
        let eligible = |&&k: &&usize| sym.degree(k) == sym.degree(i) + 1;
        let chosen = match pick {
            PickRule::FirstEligible => sym.children(i).iter().rev().find(eligible),
            PickRule::MaxDegreeEligible => {
                // eligible children share one degree, so the largest-degree
                // rule resolves to the smallest eligible vertex
                sym.children(i).iter().find(eligible)
            }
        };
        snode[i] = match chosen {
            Some(&j) => snode[j],
            None => i,
        };
    }

    let reps: Vec<usize> = (0..n).filter(|&v| snode[v] == v).collect();
    let l = reps.len();
    let mut rep_slot = vec![usize::MAX; n];
    for (c, &r) in reps.iter().enumerate() {
        rep_slot[r] = c;
    }
    let clique_of: Vec<usize> = (0..n).map(|v| rep_slot[snode[v]]).collect();

    let mut new_sets: Vec<Vec<usize>> = vec![Vec::new(); l];
    for v in 0..n {
        new_sets[clique_of[v]].push(v);
    }
    let anc_sets: Vec<Vec<usize>> = (0..l)
        .map(|c| sym.colset(*new_sets[c].last().expect("supernode is nonempty")).to_vec())
        .collect();
    let frames: Vec<Vec<usize>> = (0..l)
        .map(|c| {
            let mut f = new_sets[c].clone();
            f.extend_from_slice(&anc_sets[c]);
            f
        })
        .collect();
    let first_anc: Vec<Option<usize>> = (0..l).map(|c| anc_sets[c].first().copied()).collect();
    let cparent: Vec<Option<usize>> = (0..l)
        .map(|c| first_anc[c].map(|v| clique_of[v]))
        .collect();
    let mut cchildren: Vec<Vec<usize>> = vec![Vec::new(); l];
    for c in 0..l {
        if let Some(p) = cparent[c] {
            cchildren[p].push(c);
        }
    }

    // Postorder over cliques, children before parents, roots and children
    // in ascending clique order.
    let mut cpostorder = Vec::with_capacity(l);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for root in (0..l).filter(|&c| cparent[c].is_none()) {
        stack.push((root, 0));
        while let Some(&mut (c, ref mut next)) = stack.last_mut() {
            if *next < cchildren[c].len() {
                let child = cchildren[c][*next];
                *next += 1;
                stack.push((child, 0));
            } else {
                stack.pop();
                cpostorder.push(c);
            }
        }
    }
    debug_assert_eq!(cpostorder.len(), l);

    // Positions of each anc set inside the parent frame.
    let mut crelidx: Vec<Vec<usize>> = vec![Vec::new(); l];
    for c in 0..l {
        if let Some(p) = cparent[c] {
            let frame = &frames[p];
            let mut map = Vec::with_capacity(anc_sets[c].len());
            let mut t = 0;
            for &r in &anc_sets[c] {
                while t < frame.len() && frame[t] < r {
                    t += 1;
                }
                debug_assert!(
                    t < frame.len() && frame[t] == r,
                    "anc set escapes parent frame"
                );
                map.push(t);
            }
            crelidx[c] = map;
        }
    }

    let (peak_stack_entries, peak_update_scalars) =
        simulate_sweep(&cpostorder, &cparent, &cchildren, &anc_sets);

    CliqueForest {
        n,
        reps,
        snode,
        clique_of,
        new_sets,
        anc_sets,
        frames,
        first_anc,
        cparent,
        cchildren,
        cpostorder,
        crelidx,
        peak_stack_entries,
        peak_update_scalars,
    }
}

/// Dry run of a postorder sweep counting pending update matrices and their
/// total scalar sizes. In postorder every child has pushed exactly one
/// update by the time its parent is visited.
fn simulate_sweep(
    cpostorder: &[usize],
    cparent: &[Option<usize>],
    cchildren: &[Vec<usize>],
    anc_sets: &[Vec<usize>],
) -> (usize, usize) {
    let mut entries = 0usize;
    let mut scalars = 0usize;
    let mut peak_entries = 0usize;
    let mut peak_scalars = 0usize;
    for &c in cpostorder {
        for &k in &cchildren[c] {
            entries -= 1;
            scalars -= anc_sets[k].len() * anc_sets[k].len();
        }
        if cparent[c].is_some() {
            entries += 1;
            scalars += anc_sets[c].len() * anc_sets[c].len();
            peak_entries = peak_entries.max(entries);
            peak_scalars = peak_scalars.max(scalars);
        }
    }
    (peak_entries, peak_scalars)
}

/// First violated clique tree property, checked by brute force, or `Ok`
/// when all hold.
pub fn verify_clique_tree(
    cf: &CliqueForest,
    sym: &SymbolicAnalysis,
) -> Result<(), CliqueTreeViolation> {
    let n = sym.order();
    let l = cf.len();

    // the new sets partition the vertices
    let mut seen = vec![0usize; n];
    for c in 0..l {
        for &v in cf.new_set(c) {
            seen[v] += 1;
        }
    }
    if let Some(v) = (0..n).find(|&v| seen[v] != 1) {
        return Err(CliqueTreeViolation::NotPartition { vertex: v });
    }

    for c in 0..l {
        let rep = cf.rep(c);
        // new and anc reassemble the clique vertex set
        let mut merged: Vec<usize> = cf.new_set(c).iter().chain(cf.anc_set(c)).copied().collect();
        merged.sort_unstable();
        merged.dedup();
        let clique: Vec<usize> = sym.pattern().col(rep).to_vec();
        if merged != clique || cf.new_set(c).len() + cf.anc_set(c).len() != clique.len() {
            return Err(CliqueTreeViolation::CliqueSetsInconsistent { rep });
        }
        // ordered partition: every owned vertex below every ancestor vertex
        if let (Some(&mx), Some(&mn)) = (cf.new_set(c).last(), cf.anc_set(c).first()) {
            if mx >= mn {
                return Err(CliqueTreeViolation::OrderedPartitionViolated { rep });
            }
        }
        match (cf.anc_set(c).first(), cf.cparent(c)) {
            (None, None) => {}
            (None, Some(_)) => return Err(CliqueTreeViolation::RootHasParent { rep }),
            (Some(_), None) => return Err(CliqueTreeViolation::MissingParent { rep }),
            (Some(&fa), Some(p)) => {
                if cf.first_anc(c) != Some(fa) {
                    return Err(CliqueTreeViolation::FirstAncMismatch { rep });
                }
                if !cf.new_set(p).contains(&fa) {
                    return Err(CliqueTreeViolation::FirstAncNotInParentNew {
                        rep,
                        parent_rep: cf.rep(p),
                    });
                }
                // anc(c) is contained in the parent clique
                for &v in cf.anc_set(c) {
                    if !cf.frame(p).contains(&v) {
                        return Err(CliqueTreeViolation::AncEscapesParentClique { rep, vertex: v });
                    }
                }
            }
        }
    }

    // induced subtree: walking up from any clique containing v, v stays
    // present until the clique owning v is reached
    for v in 0..n {
        let home = cf.clique_of(v);
        for c in (0..l).filter(|&c| cf.frame(c).contains(&v)) {
            let mut cur = c;
            let mut steps = 0;
            while cur != home {
                match cf.cparent(cur) {
                    Some(p) if cf.frame(p).contains(&v) && steps <= l => {
                        cur = p;
                        steps += 1;
                    }
                    _ => {
                        return Err(CliqueTreeViolation::SubtreeBroken {
                            vertex: v,
                            rep: cf.rep(c),
                        })
                    }
                }
            }
        }
    }

    Ok(())
}

/// Order in which the vertices of each supernode receive consecutive
/// labels: cliques in postorder, each clique's owned vertices ascending.
/// Refilling a pattern with this order preserves its nonzero count and
/// makes every supernode an integer interval.
pub fn contiguous_relabeling(cf: &CliqueForest) -> Vec<usize> {
    let mut order = Vec::with_capacity(cf.order());
    for &c in cf.cpostorder() {
        order.extend_from_slice(cf.new_set(c));
    }
    order
}

/// A failed clique tree property, identified by the representative vertex
/// of the offending clique.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CliqueTreeViolation {
    /// A vertex is owned by no supernode or by several.
    NotPartition { vertex: usize },
    /// `new` and `anc` do not split the clique vertex set.
    CliqueSetsInconsistent { rep: usize },
    /// An owned vertex is not below all ancestor vertices.
    OrderedPartitionViolated { rep: usize },
    /// A clique with ancestors has no parent.
    MissingParent { rep: usize },
    /// A clique without ancestors has a parent.
    RootHasParent { rep: usize },
    /// `first_anc` is not the smallest ancestor vertex.
    FirstAncMismatch { rep: usize },
    /// The parent clique does not own the first ancestor.
    FirstAncNotInParentNew { rep: usize, parent_rep: usize },
    /// An ancestor vertex is missing from the parent clique.
    AncEscapesParentClique { rep: usize, vertex: usize },
    /// The cliques containing a vertex do not form a connected subtree.
    SubtreeBroken { vertex: usize, rep: usize },
}

impl fmt::Display for CliqueTreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CliqueTreeViolation::NotPartition { vertex } => {
                write!(f, "vertex {vertex} is not in exactly one supernode")
            }
            CliqueTreeViolation::CliqueSetsInconsistent { rep } => {
                write!(f, "new/anc of clique {rep} do not split its vertex set")
            }
            CliqueTreeViolation::OrderedPartitionViolated { rep } => {
                write!(f, "clique {rep} owns a vertex above one of its ancestors")
            }
            CliqueTreeViolation::MissingParent { rep } => {
                write!(f, "clique {rep} has ancestors but no parent")
            }
            CliqueTreeViolation::RootHasParent { rep } => {
                write!(f, "clique {rep} has no ancestors but has a parent")
            }
            CliqueTreeViolation::FirstAncMismatch { rep } => {
                write!(f, "first ancestor of clique {rep} is not its smallest ancestor")
            }
            CliqueTreeViolation::FirstAncNotInParentNew { rep, parent_rep } => {
                write!(
                    f,
                    "first ancestor of clique {rep} is not owned by parent clique {parent_rep}"
                )
            }
            CliqueTreeViolation::AncEscapesParentClique { rep, vertex } => {
                write!(
                    f,
                    "ancestor vertex {vertex} of clique {rep} is missing from the parent clique"
                )
            }
            CliqueTreeViolation::SubtreeBroken { vertex, rep } => {
                write!(
                    f,
                    "cliques containing vertex {vertex} disconnect at clique {rep}"
                )
            }
        }
    }
}
