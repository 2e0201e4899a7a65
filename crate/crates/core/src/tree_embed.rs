//! Isometric embeddings of tree metrics into `l_inf` with prioritized
//! dimension.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::embedding::Embedding;
use crate::fold::{k_folding, FoldError, KFoldingRecord};
use crate::priority::{PriorityError, PriorityOrdering};
use crate::scalar::Scalar;
use crate::separator::split_subtree;
use crate::tree::WeightedTree;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TreeEmbedError {
    #[error(transparent)]
    Ordering(#[from] PriorityError),
    #[error(transparent)]
    Fold(#[from] FoldError),
}

/// Output of [`embed_terminal_set`].
#[derive(Debug, Clone)]
pub struct TerminalEmbedding {
    /// One vector per vertex of the input tree.
    pub embedding: Embedding,
    pub record: KFoldingRecord,
    /// Distinct lift vertices sitting on a folding point.
    pub crossing_vertices: usize,
    /// `4 * ceil(log2 max(b, 1)) + 1` with `b = |K| - 1`.
    pub dimension_bound: usize,
}

impl TerminalEmbedding {
    pub fn within_bound(&self) -> bool {
        self.embedding.dim() <= self.dimension_bound
    }
}

fn ceil_log2(x: usize) -> usize {
    x.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Folds `k` together and embeds the vertices of `t` non-expansively so
/// that every pair whose distance the folding shrinks is kept exactly.
pub fn embed_terminal_set(t: &WeightedTree, k: &[usize]) -> Result<TerminalEmbedding, FoldError> {
    let record = k_folding(t, k)?;
    let mut distinct: Vec<usize> = k.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let dimension_bound = 4 * ceil_log2(distinct.len().saturating_sub(1)) + 1;

    let mut g = record.lift.clone();
    let mut is_crossing = vec![false; g.len()];
    record.crossings.iter().for_each(|c| is_crossing[c.vertex] = true);
    let bare: Vec<(usize, usize, Scalar)> = g
        .edges()
        .iter()
        .filter(|e| is_crossing[e.u] && is_crossing[e.v])
        .map(|e| (e.u, e.v, e.w.half()))
        .collect();
    for (u, v, mid) in bare {
        g.subdivide(u, v, &[mid]);
    }

    // crossing vertex -> one neighbor set per fold it serves
    let mut records: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for c in &record.crossings {
        let minus = c.minus.iter().map(|&r| g.path(c.vertex, r)[1]).collect();
        records.entry(c.vertex).or_default().push(minus);
    }
    let crossing_vertices = records.len();

    let h: Vec<usize> = (0..g.len()).collect();
    let (dim, rows) = embed_subtree(&g, &h, &records);
    let vectors = rows.into_iter().take(t.len()).collect();
    let embedding = Embedding::new(dim, vectors).expect("rows share the block dimension");
    Ok(TerminalEmbedding { embedding, record, crossing_vertices, dimension_bound })
}

/// Rows aligned with `h`.
fn embed_subtree(g: &WeightedTree, h: &[usize], records: &BTreeMap<usize, Vec<Vec<usize>>>) -> (usize, Vec<Vec<Scalar>>) {
    let mut in_h = vec![false; g.len()];
    h.iter().for_each(|&v| in_h[v] = true);
    let mut terminal = vec![false; g.len()];
    let mut present = Vec::new();
    for &v in records.keys() {
        if in_h[v] {
            terminal[v] = true;
            present.push(v);
        }
    }
    match present.len() {
        0 => (0, vec![Vec::new(); h.len()]),
        1 => {
            let y = present[0];
            let mut rows = vec![Vec::new(); h.len()];
            for minus in &records[&y] {
                let values = signed_distances(g, y, &in_h, minus);
                for (row, &u) in rows.iter_mut().zip(h) {
                    row.push(values[u].clone().expect("subtree is connected"));
                }
            }
            (records[&y].len(), rows)
        }
        _ => {
            let split = split_subtree(g, h, &in_h, &terminal);
            let s = split.s;
            let ((d1, r1), (d2, r2)) = rayon::join(
                || embed_subtree(g, &split.t1, records),
                || embed_subtree(g, &split.t2, records),
            );
            let dim = d1.max(d2) + 1;
            let (ds, _) = g.distances_within(s, Some(&in_h));
            let mut rows: Vec<Option<Vec<Scalar>>> = vec![None; g.len()];
            for (side, rws, sign) in [(&split.t1, r1, false), (&split.t2, r2, true)] {
                let at_s = rws[side.binary_search(&s).expect("s is on both sides")].clone();
                for (&u, mut row) in side.iter().zip(rws) {
                    for (x, base) in row.iter_mut().zip(&at_s) {
                        *x = &*x - base;
                    }
                    row.resize(dim - 1, Scalar::ZERO);
                    let d = ds[u].clone().expect("subtree is connected");
                    row.push(if sign { -d } else { d });
                    if !(u == s && sign) {
                        rows[u] = Some(row);
                    }
                }
            }
            (dim, h.iter().map(|&u| rows[u].take().expect("sides cover the subtree")).collect())
        }
    }
}

/// `d(y, u)` for vertices reached from `y` through a `minus` neighbor and
/// `-d(y, u)` otherwise.
fn signed_distances(g: &WeightedTree, y: usize, in_h: &[bool], minus: &[usize]) -> Vec<Option<Scalar>> {
    let mut out: Vec<Option<Scalar>> = vec![None; g.len()];
    out[y] = Some(Scalar::ZERO);
    let mut stack = Vec::new();
    for (u, w) in g.neighbors(y) {
        if in_h[u] {
            let positive = minus.contains(&u);
            out[u] = Some(if positive { w.clone() } else { -w });
            stack.push((u, positive));
        }
    }
    while let Some((v, positive)) = stack.pop() {
        let dv = out[v].clone().expect("visited");
        for (u, w) in g.neighbors(v) {
            if in_h[u] && out[u].is_none() {
                out[u] = Some(if positive { &dv + w } else { &dv - w });
                stack.push((u, positive));
            }
        }
    }
    out
}

/// One level of [`prioritized_tree_embedding`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeLevel {
    /// First and last priority index in this level.
    pub ranks: (usize, usize),
    pub dim: usize,
    pub crossing_vertices: usize,
    pub dimension_bound: usize,
}

#[derive(Debug, Clone)]
pub struct TreeEmbedding {
    /// One vector per real vertex, in ascending id order.
    pub embedding: Embedding,
    pub levels: Vec<TreeLevel>,
}

impl TreeEmbedding {
    /// Coordinates up to and including the level of priority `j`; every
    /// nonzero entry of that point lies in this prefix.
    pub fn prefix_bound(&self, j: usize) -> usize {
        let mut total = 0;
        for l in &self.levels {
            total += l.dim;
            if j <= l.ranks.1 {
                return total;
            }
        }
        total
    }
}

/// Priority ranges of the levels for `n` points: `1..=4`, then
/// `2^(2^(i-1)) + 1 ..= 2^(2^i)`, truncated at `n`.
pub fn level_ranges(n: usize) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let mut out = vec![(1, n.min(4))];
    let mut i = 2u32;
    loop {
        let lo = pow2_pow2(i - 1);
        if lo >= n {
            break;
        }
        out.push((lo + 1, pow2_pow2(i).min(n)));
        i += 1;
    }
    out
}

fn pow2_pow2(i: u32) -> usize {
    1usize.checked_shl(1u32 << i).unwrap_or(usize::MAX)
}

/// Exact embedding of the real vertices of `t`; `ord` ranks them by their
/// position among the real vertices in ascending id order.
pub fn prioritized_tree_embedding(t: &WeightedTree, ord: &PriorityOrdering) -> Result<TreeEmbedding, TreeEmbedError> {
    let real = t.real_vertices();
    ord.expect_len(real.len())?;
    let n = real.len();
    let mut out = Embedding::zeros(n, 0);
    let mut levels = Vec::new();
    if n == 0 {
        return Ok(TreeEmbedding { embedding: out, levels });
    }
    let mut tree = t.clone();
    let mut map: Vec<usize> = (0..t.len()).collect();
    let z = real[ord.point(1)];
    for (lo, hi) in level_ranges(n) {
        let mut k = vec![map[z]];
        k.extend((lo..=hi).map(|j| map[real[ord.point(j)]]));
        let level = embed_terminal_set(&tree, &k)?;
        let zero = level.embedding.vector(k[0]).to_vec();
        let vectors = real
            .iter()
            .map(|&v| {
                level.embedding.vector(map[v]).iter().zip(&zero).map(|(a, b)| a - b).collect()
            })
            .collect();
        let block = Embedding::new(level.embedding.dim(), vectors).expect("uniform block");
        levels.push(TreeLevel {
            ranks: (lo, hi),
            dim: block.dim(),
            crossing_vertices: level.crossing_vertices,
            dimension_bound: level.dimension_bound,
        });
        out = out.concat(&block);
        map = map.iter().map(|&x| level.record.input_map[x]).collect();
        tree = level.record.final_tree;
    }
    Ok(TreeEmbedding { embedding: out, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{dimension_report, distortion_report, Extended};

    fn s(v: i64) -> Scalar {
        Scalar::from_int(v)
    }

    #[test]
    fn level_ranges_examples() {
        assert!(level_ranges(1).is_empty());
        assert_eq!(level_ranges(2), vec![(1, 2)]);
        assert_eq!(level_ranges(4), vec![(1, 4)]);
        assert_eq!(level_ranges(5), vec![(1, 4), (5, 5)]);
        assert_eq!(level_ranges(300), vec![(1, 4), (5, 16), (17, 256), (257, 300)]);
    }

    #[test]
    fn singleton_terminal_maps_to_zero() {
        let t = WeightedTree::from_edges(3, vec![(0, 1, s(1)), (1, 2, s(2))]).unwrap();
        let r = embed_terminal_set(&t, &[1]).unwrap();
        assert_eq!(r.embedding.dim(), 0);
        assert_eq!(r.record.final_tree, t);
    }

    #[test]
    fn single_edge_base_case() {
        let t = WeightedTree::from_edges(2, vec![(0, 1, s(2))]).unwrap();
        let r = embed_terminal_set(&t, &[0, 1]).unwrap();
        assert_eq!(r.embedding.dim(), 1);
        assert_eq!(r.embedding.vector(0), &[s(1)]);
        assert_eq!(r.embedding.vector(1), &[s(-1)]);
        assert!(r.within_bound());
    }

    #[test]
    fn trivial_trees() {
        let one = WeightedTree::from_edges(1, vec![]).unwrap();
        let e = prioritized_tree_embedding(&one, &PriorityOrdering::identity(1)).unwrap();
        assert_eq!(e.embedding.dim(), 0);
        let two = WeightedTree::from_edges(2, vec![(0, 1, s(7))]).unwrap();
        let e = prioritized_tree_embedding(&two, &PriorityOrdering::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(e.embedding.distance(0, 1), s(7));
        assert!(prioritized_tree_embedding(&two, &PriorityOrdering::identity(3)).is_err());
    }

    #[test]
    fn caterpillar_is_isometric() {
        let mut edges = Vec::new();
        for i in 0..9 {
            edges.push((i, i + 1, s(1 + (i as i64 * 7) % 5)));
        }
        for i in 0..10 {
            edges.push((i, 10 + i, s(1 + (i as i64 * 3) % 4)));
        }
        let t = WeightedTree::from_edges(20, edges).unwrap();
        let ord = PriorityOrdering::new((0..20).map(|i| (i * 7) % 20).collect()).unwrap();
        let e = prioritized_tree_embedding(&t, &ord).unwrap();
        let m = t.real_metric();
        let rep = distortion_report(&m, &e.embedding, &ord, false);
        assert_eq!(rep.worst_distortion(), Extended::Finite(Scalar::ONE));
        let dims = dimension_report(&e.embedding, &ord);
        for (j, b) in dims.per_j.iter().enumerate() {
            assert!(*b <= e.prefix_bound(j + 1));
        }
    }
}
