//! Minimum degree elimination ordering.
//!
//! A plain greedy implementation: at each step pick the vertex of smallest
//! current degree, breaking ties toward the smallest vertex number, and
//! connect its remaining neighbors into a clique. The result is suitable as
//! an elimination order for the fill computation, which adds whatever fill
//! the ordering could not avoid.

use chordbar::pattern::SparsityPattern;
use std::collections::BTreeSet;

pub fn min_degree_order(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.order();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for j in 0..n {
        for &i in pattern.col(j) {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }

    let mut alive: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&(_, v)) = alive.iter().next() {
        alive.remove(&(adj[v].len(), v));
        order.push(v);

        let neighbors: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &neighbors {
            alive.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        for (a, &u) in neighbors.iter().enumerate() {
            for &w in &neighbors[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &neighbors {
            alive.insert((adj[u].len(), u));
        }
        adj[v].clear();
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use chordbar::oracle;
    use chordbar::symbolic;

    fn fill_count(pattern: &SparsityPattern, order: &[usize]) -> usize {
        let sym = symbolic::fill_pattern(pattern, order).unwrap();
        sym.pattern().nnz()
    }

    #[test]
    fn band_pattern_needs_no_extra_fill() {
        let pattern = oracle::band_pattern(40, 3);
        let natural: Vec<usize> = (0..40).collect();
        let order = min_degree_order(&pattern);
        assert_eq!(
            fill_count(&pattern, &order),
            fill_count(&pattern, &natural)
        );
    }

    #[test]
    fn star_center_is_eliminated_last() {
        let n = 9;
        let mut entries: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for leaf in 0..n - 1 {
            entries.push((n - 1, leaf));
        }
        let pattern = SparsityPattern::from_entries(n, entries).unwrap();
        let order = min_degree_order(&pattern);
        assert_eq!(order[n - 1], n - 1);
        assert_eq!(order[..n - 1], (0..n - 1).collect::<Vec<_>>()[..]);
        assert_eq!(fill_count(&pattern, &order), pattern.nnz());
    }

    #[test]
    fn never_worse_than_natural_order_on_random_patterns() {
        for seed in 0..4 {
            let pattern = oracle::gen_chordal(60, 0.08, seed);
            let natural: Vec<usize> = (0..pattern.order()).collect();
            let order = min_degree_order(&pattern);
            assert!(fill_count(&pattern, &order) <= fill_count(&pattern, &natural));
        }
    }
}
