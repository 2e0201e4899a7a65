//! Balanced splits of a tree with respect to a terminal set.

use crate::tree::WeightedTree;

/// Two subtrees that cover the input and share exactly the vertex `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparatorSplit {
    pub s: usize,
    /// Sorted vertex ids.
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
}

/// Splits `t` so that each side holds at most `ceil(2|K|/3)` terminals.
pub fn tree_separator(t: &WeightedTree, k: &[usize]) -> SeparatorSplit {
    let mut terminal = vec![false; t.len()];
    k.iter().for_each(|&v| terminal[v] = true);
    let all: Vec<usize> = (0..t.len()).collect();
    split_subtree(t, &all, &vec![true; t.len()], &terminal)
}

/// [`tree_separator`] on the subtree spanned by `h` (a connected vertex set
/// whose membership is `in_h`).
pub(crate) fn split_subtree(t: &WeightedTree, h: &[usize], in_h: &[bool], terminal: &[bool]) -> SeparatorSplit {
    let root = h[0];
    let mut parent = vec![usize::MAX; t.len()];
    let mut order = Vec::with_capacity(h.len());
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(v) = stack.pop() {
        order.push(v);
        for (u, _) in t.neighbors(v) {
            if in_h[u] && parent[u] == usize::MAX {
                parent[u] = v;
                stack.push(u);
            }
        }
    }
    let mut count = vec![0usize; t.len()];
    for &v in order.iter().rev() {
        count[v] += terminal[v] as usize;
        if v != root {
            count[parent[v]] += count[v];
        }
    }
    let m = count[root];
    // (neighbor, terminals in its component) for every vertex in h
    let components = |v: usize| -> Vec<(usize, usize)> {
        t.neighbors(v)
            .filter(|&(u, _)| in_h[u])
            .map(|(u, _)| if parent[u] == v && u != root { (u, count[u]) } else { (u, m - count[v]) })
            .collect()
    };
    let s = *order
        .iter()
        .min_by_key(|&&v| {
            let worst = components(v).iter().map(|c| c.1).max().unwrap_or(0);
            (worst, terminal[v], v)
        })
        .expect("subtree is nonempty");

    let mut comps = components(s);
    comps.sort_by_key(|&(u, c)| (std::cmp::Reverse(c), u));
    let rest = m - terminal[s] as usize;
    let mut side_a = Vec::new();
    let mut side_b = Vec::new();
    let mut in_a = 0;
    for (u, c) in comps {
        if c == 0 || 3 * in_a < rest {
            in_a += c;
            side_a.push(u);
        } else {
            side_b.push(u);
        }
    }
    let collect = |starts: &[usize]| -> Vec<usize> {
        let mut out = vec![s];
        let mut seen = vec![false; t.len()];
        seen[s] = true;
        let mut stack: Vec<usize> = starts.to_vec();
        starts.iter().for_each(|&u| seen[u] = true);
        while let Some(v) = stack.pop() {
            out.push(v);
            for (u, _) in t.neighbors(v) {
                if in_h[u] && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        out.sort_unstable();
        out
    };
    SeparatorSplit { s, t1: collect(&side_a), t2: collect(&side_b) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use proptest::prelude::*;

    fn unit_tree(n: usize, edges: &[(usize, usize)]) -> WeightedTree {
        WeightedTree::from_edges(n, edges.iter().map(|&(u, v)| (u, v, Scalar::ONE)).collect()).unwrap()
    }

    fn count(side: &[usize], k: &[usize]) -> usize {
        side.iter().filter(|v| k.contains(v)).count()
    }

    #[test]
    fn path_of_three() {
        let t = unit_tree(3, &[(0, 1), (1, 2)]);
        let sp = tree_separator(&t, &[0, 1, 2]);
        assert_eq!(sp.s, 1);
        assert!(count(&sp.t1, &[0, 1, 2]) <= 2 && count(&sp.t2, &[0, 1, 2]) <= 2);
    }

    #[test]
    fn star_leaves() {
        let m = 7;
        let edges: Vec<_> = (1..=m).map(|i| (0, i)).collect();
        let t = unit_tree(m + 1, &edges);
        let k: Vec<usize> = (1..=m).collect();
        let sp = tree_separator(&t, &k);
        assert_eq!(sp.s, 0);
        let bound = (2 * m).div_ceil(3);
        assert!(count(&sp.t1, &k) <= bound && count(&sp.t2, &k) <= bound);
    }

    #[test]
    fn single_terminal() {
        let t = unit_tree(4, &[(0, 1), (1, 2), (2, 3)]);
        let sp = tree_separator(&t, &[2]);
        assert_eq!(sp.s, 2);
        assert_eq!(sp.t1, vec![0, 1, 2, 3]);
        assert_eq!(sp.t2, vec![2]);
    }

    proptest! {
        #[test]
        fn split_is_balanced_cover(parents in proptest::collection::vec(any::<prop::sample::Index>(), 1..40),
                                   mask in proptest::collection::vec(any::<bool>(), 41)) {
            let n = parents.len() + 1;
            let edges: Vec<_> = parents.iter().enumerate().map(|(i, p)| (p.index(i + 1), i + 1)).collect();
            let t = unit_tree(n, &edges);
            let mut k: Vec<usize> = (0..n).filter(|&v| mask[v]).collect();
            if k.is_empty() { k.push(0); }
            let sp = tree_separator(&t, &k);
            let bound = (2 * k.len()).div_ceil(3);
            prop_assert!(count(&sp.t1, &k) <= bound);
            prop_assert!(count(&sp.t2, &k) <= bound);
            let mut both: Vec<usize> = sp.t1.iter().chain(&sp.t2).cloned().collect();
            both.sort_unstable();
            both.dedup();
            prop_assert_eq!(both.len(), n);
            prop_assert_eq!(sp.t1.len() + sp.t2.len(), n + 1);
            for side in [&sp.t1, &sp.t2] {
                // a vertex set of size s spans s-1 tree edges iff connected
                let inside = t.edges().iter().filter(|e| side.contains(&e.u) && side.contains(&e.v)).count();
                prop_assert_eq!(inside + 1, side.len());
            }
        }
    }
}
