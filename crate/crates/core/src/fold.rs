//! Path folding and K-folding of trees.
//!
//! Folding the `u`–`v` path of length `L` identifies the point at distance
//! `q` from `u` with the point at distance `L - q`. Points that fall inside
//! an edge become Steiner vertices first, so the result is again a tree.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tree::WeightedTree;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FoldError {
    #[error("cannot fold a path from vertex {0} to itself")]
    SameVertex(usize),
    #[error("terminal set is empty")]
    EmptyTerminalSet,
    #[error("terminal {0} is not a vertex of the tree")]
    UnknownVertex(usize),
}

/// Steiner vertices inserted on the input edge `from`–`to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subdivision {
    pub from: usize,
    pub to: usize,
    /// Distances from `from`, increasing.
    pub offsets: Vec<Scalar>,
    /// Ids of the inserted vertices in the subdivided tree.
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub folded: WeightedTree,
    /// Id of the folding point in `folded`.
    pub folding_point: usize,
    /// The input tree with every breakpoint inserted. Input ids are kept.
    pub subdivided: WeightedTree,
    /// Subdivided id to folded id.
    pub merged: Vec<usize>,
    /// The folded path in subdivided ids, from `u` to `v`.
    pub path: Vec<usize>,
    /// Distance of each path vertex from `u`.
    pub positions: Vec<Scalar>,
    pub length: Scalar,
    pub subdivisions: Vec<Subdivision>,
}

impl FoldResult {
    /// Index of the folding point within `path`.
    pub fn mid_index(&self) -> usize {
        (self.path.len() - 1) / 2
    }

    /// Subdivided id of the folding point.
    pub fn folding_point_subdivided(&self) -> usize {
        self.path[self.mid_index()]
    }

    /// Folded id of an input-tree vertex.
    pub fn image(&self, v: usize) -> usize {
        self.merged[v]
    }
}

pub fn fold_path(t: &WeightedTree, u: usize, v: usize) -> Result<FoldResult, FoldError> {
    for x in [u, v] {
        if x >= t.len() {
            return Err(FoldError::UnknownVertex(x));
        }
    }
    if u == v {
        return Err(FoldError::SameVertex(u));
    }
    let orig_path = t.path(u, v);
    let mut orig_pos = vec![Scalar::ZERO];
    for w in orig_path.windows(2) {
        let step = t.edge_weight(w[0], w[1]).expect("consecutive path vertices are adjacent");
        let next = orig_pos.last().unwrap() + step;
        orig_pos.push(next);
    }
    let length = orig_pos.last().unwrap().clone();
    let mut breaks: BTreeSet<Scalar> = BTreeSet::new();
    for p in &orig_pos {
        breaks.insert(p.clone());
        breaks.insert(&length - p);
    }
    breaks.insert(length.half());

    let mut sub = t.clone();
    let mut subdivisions = Vec::new();
    let mut path = vec![u];
    let mut positions = vec![Scalar::ZERO];
    for i in 0..orig_path.len() - 1 {
        let (a, b) = (&orig_pos[i], &orig_pos[i + 1]);
        let inner: Vec<Scalar> = breaks
            .range((std::ops::Bound::Excluded(a), std::ops::Bound::Excluded(b)))
            .cloned()
            .collect();
        if !inner.is_empty() {
            let offsets: Vec<Scalar> = inner.iter().map(|q| q - a).collect();
            let ids = sub.subdivide(orig_path[i], orig_path[i + 1], &offsets);
            path.extend_from_slice(&ids);
            positions.extend(inner);
            subdivisions.push(Subdivision { from: orig_path[i], to: orig_path[i + 1], offsets, vertices: ids });
        }
        path.push(orig_path[i + 1]);
        positions.push(b.clone());
    }

    let m = path.len() - 1;
    let mut rep: Vec<usize> = (0..sub.len()).collect();
    for k in 0..=m / 2 {
        debug_assert_eq!(&positions[k] + &positions[m - k], length);
        rep[path[m - k]] = path[k];
    }
    let mut class = vec![usize::MAX; sub.len()];
    let mut merged = vec![0; sub.len()];
    let mut steiner = Vec::new();
    for x in 0..sub.len() {
        let r = rep[x];
        if class[r] == usize::MAX {
            class[r] = steiner.len();
            steiner.push(true);
        }
        merged[x] = class[r];
        steiner[class[r]] &= sub.is_steiner(x);
    }
    let mut edges: BTreeMap<(usize, usize), Scalar> = BTreeMap::new();
    for e in sub.edges() {
        let (a, b) = (merged[e.u], merged[e.v]);
        debug_assert_ne!(a, b, "no edge straddles the folding point");
        let key = (a.min(b), a.max(b));
        match edges.get(&key) {
            Some(w) if *w <= e.w => {}
            _ => {
                edges.insert(key, e.w.clone());
            }
        }
    }
    let folded = WeightedTree::from_parts(steiner, edges.into_iter().map(|((a, b), w)| (a, b, w)).collect());
    debug_assert_eq!(folded.edges().len() + 1, folded.len());
    let folding_point = merged[path[m / 2]];
    Ok(FoldResult { folded, folding_point, subdivided: sub, merged, path, positions, length, subdivisions })
}

/// Whether the `u`–`v` path of `t` meets the interiors of both halves of
/// the path folded by `fold` (which must have been computed on `t`).
pub fn crosses(t: &WeightedTree, u: usize, v: usize, fold: &FoldResult) -> bool {
    let pos: HashMap<usize, &Scalar> = fold
        .path
        .iter()
        .zip(&fold.positions)
        .filter(|(x, _)| **x < t.len())
        .map(|(x, p)| (*x, p))
        .collect();
    let mut lo: Option<&Scalar> = None;
    let mut hi: Option<&Scalar> = None;
    for x in t.path(u, v) {
        if let Some(p) = pos.get(&x) {
            lo = Some(lo.map_or(*p, |l| l.min(*p)));
            hi = Some(hi.map_or(*p, |h| h.max(*p)));
        }
    }
    let mid = fold.length.half();
    matches!((lo, hi), (Some(a), Some(b)) if *a < mid && mid < *b)
}

/// One fold of a K-folding.
#[derive(Debug, Clone)]
pub struct FoldStep {
    /// Folded endpoints, as ids of `before`.
    pub a: usize,
    pub b: usize,
    pub before: WeightedTree,
    pub fold: FoldResult,
    /// Input-tree vertex to `before` id.
    pub input_map: Vec<usize>,
}

/// A folding point seen in the lift: `vertex` is a lift vertex mapped onto
/// the folding point of step `step`; `minus` lists lift vertices whose
/// direction from `vertex` leads into the first half of the folded path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crossing {
    pub vertex: usize,
    pub minus: Vec<usize>,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct KFoldingRecord {
    pub final_tree: WeightedTree,
    pub steps: Vec<FoldStep>,
    /// Folding point of each step, as an id of that step's folded tree.
    pub folding_points: Vec<usize>,
    /// The vertex of `final_tree` that all terminals map to.
    pub z: usize,
    /// Input-tree vertex to `final_tree` id.
    pub input_map: Vec<usize>,
    /// The input tree subdivided at every point any fold cut; input ids kept.
    pub lift: WeightedTree,
    /// Lift vertex to `final_tree` id. Every lift edge maps onto an edge of
    /// the same weight.
    pub lift_map: Vec<usize>,
    pub crossings: Vec<Crossing>,
}

/// Folds the terminals of `k` together, always folding the closest pair of
/// not yet identified terminals (ties to the smallest ids).
pub fn k_folding(t: &WeightedTree, k: &[usize]) -> Result<KFoldingRecord, FoldError> {
    if k.is_empty() {
        return Err(FoldError::EmptyTerminalSet);
    }
    if let Some(&bad) = k.iter().find(|&&x| x >= t.len()) {
        return Err(FoldError::UnknownVertex(bad));
    }
    let mut cur = t.clone();
    let mut input_map: Vec<usize> = (0..t.len()).collect();
    let mut lift = t.clone();
    let mut lift_map: Vec<usize> = (0..t.len()).collect();
    let mut steps = Vec::new();
    let mut folding_points = Vec::new();
    let mut crossings = Vec::new();
    loop {
        let reps: BTreeSet<usize> = k.iter().map(|&x| input_map[x]).collect();
        if reps.len() < 2 {
            break;
        }
        let reps: Vec<usize> = reps.into_iter().collect();
        let mut best: Option<(Scalar, usize, usize)> = None;
        for (i, &a) in reps.iter().enumerate() {
            let dist = cur.distances_from(a);
            for &b in &reps[i + 1..] {
                if best.as_ref().is_none_or(|(d, _, _)| dist[b] < *d) {
                    best = Some((dist[b].clone(), a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two representatives");
        let fold = fold_path(&cur, a, b).expect("representatives are distinct");
        let step = steps.len();

        // Carry the new subdivisions over to every lift edge above them.
        let mut above: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for e in lift.edges() {
            let (x, y) = (lift_map[e.u], lift_map[e.v]);
            above.entry((x.min(y), x.max(y))).or_default().push((e.u, e.v));
        }
        let mut sub_map = lift_map.clone();
        for s in &fold.subdivisions {
            for &(p, q) in above.get(&(s.from.min(s.to), s.from.max(s.to))).into_iter().flatten() {
                let (p, q) = if lift_map[p] == s.from { (p, q) } else { (q, p) };
                lift.subdivide(p, q, &s.offsets);
                sub_map.extend_from_slice(&s.vertices);
            }
        }
        let fp = fold.folding_point_subdivided();
        let minus_nb = fold.path[fold.mid_index() - 1];
        for y in 0..lift.len() {
            if sub_map[y] == fp {
                let minus = lift.neighbors(y).map(|(p, _)| p).filter(|&p| sub_map[p] == minus_nb).collect();
                crossings.push(Crossing { vertex: y, minus, step });
            }
        }
        lift_map = sub_map.iter().map(|&x| fold.merged[x]).collect();
        let next_input: Vec<usize> = input_map.iter().map(|&x| fold.merged[x]).collect();
        folding_points.push(fold.folding_point);
        let next = fold.folded.clone();
        steps.push(FoldStep { a, b, before: std::mem::replace(&mut cur, next), fold, input_map: std::mem::replace(&mut input_map, next_input) });
    }
    let z = input_map[k[0]];
    Ok(KFoldingRecord { final_tree: cur, steps, folding_points, z, input_map, lift, lift_map, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: i64) -> Scalar {
        Scalar::from_int(v)
    }

    fn path_tree(weights: &[i64]) -> WeightedTree {
        let edges = weights.iter().enumerate().map(|(i, &w)| (i, i + 1, s(w))).collect();
        WeightedTree::from_edges(weights.len() + 1, edges).unwrap()
    }

    #[test]
    fn single_edge_folds_to_half_edge() {
        let t = path_tree(&[2]);
        let f = fold_path(&t, 0, 1).unwrap();
        assert_eq!(f.folded.len(), 2);
        assert_eq!(f.folded.edge_triples(), vec![(0, 1, s(1))]);
        assert_eq!(f.image(0), f.image(1));
        assert!(f.folded.is_steiner(f.folding_point));
        assert_ne!(f.folding_point, f.image(0));
    }

    #[test]
    fn unit_path_folds_onto_middle() {
        let t = path_tree(&[1, 1]);
        let f = fold_path(&t, 0, 2).unwrap();
        assert_eq!(f.folded.len(), 2);
        assert_eq!(f.image(0), f.image(2));
        assert_eq!(f.folding_point, f.image(1));
        assert_eq!(f.folded.distance(f.image(0), f.image(1)), s(1));
        assert!(f.subdivisions.is_empty());
    }

    #[test]
    fn uneven_path_gets_steiner_point() {
        // u - c - v with weights 1 and 3
        let t = path_tree(&[1, 3]);
        let f = fold_path(&t, 0, 2).unwrap();
        assert_eq!(f.folded.len(), 3);
        let (uv, c, m) = (f.image(0), f.image(1), f.folding_point);
        assert_eq!(f.folded.edge_weight(uv, c), Some(&s(1)));
        assert_eq!(f.folded.edge_weight(c, m), Some(&s(1)));
        assert_eq!(f.subdivided.distance(0, f.folding_point_subdivided()), s(2));
        assert!(f.folded.is_steiner(m) && !f.folded.is_steiner(c));
    }

    #[test]
    fn same_vertex_rejected() {
        assert_eq!(fold_path(&path_tree(&[1]), 1, 1).unwrap_err(), FoldError::SameVertex(1));
        assert_eq!(k_folding(&path_tree(&[1]), &[]).unwrap_err(), FoldError::EmptyTerminalSet);
    }

    #[test]
    fn crossing_examples() {
        let t = path_tree(&[1, 1, 1, 1]);
        let f = fold_path(&t, 0, 4).unwrap();
        assert!(crosses(&t, 0, 4, &f));
        assert!(crosses(&t, 1, 3, &f));
        assert!(!crosses(&t, 0, 1, &f));
        assert!(!crosses(&t, 2, 4, &f));
        let mut edges = t.edge_triples();
        edges.push((2, 5, s(1)));
        edges.push((5, 6, s(1)));
        let t2 = WeightedTree::from_edges(7, edges).unwrap();
        let f2 = fold_path(&t2, 0, 4).unwrap();
        assert!(!crosses(&t2, 5, 6, &f2));
        assert!(!crosses(&t2, 6, 1, &f2));
    }

    #[test]
    fn singleton_terminal_set_is_a_no_op() {
        let t = path_tree(&[1, 2]);
        let r = k_folding(&t, &[1]).unwrap();
        assert!(r.steps.is_empty() && r.crossings.is_empty());
        assert_eq!(r.final_tree, t);
        assert_eq!(r.z, 1);
    }

    #[test]
    fn two_terminals_match_fold_path() {
        let t = path_tree(&[2]);
        let r = k_folding(&t, &[0, 1]).unwrap();
        let f = fold_path(&t, 0, 1).unwrap();
        assert_eq!(r.final_tree, f.folded);
        assert_eq!(r.folding_points, vec![f.folding_point]);
        assert_eq!(r.crossings.len(), 1);
        assert_eq!(r.lift.len(), 3);
        assert_eq!(r.crossings[0].minus, vec![0]);
    }

    #[test]
    fn lift_edges_map_to_equal_weight_edges() {
        let t = WeightedTree::from_edges(
            6,
            vec![(0, 1, s(3)), (1, 2, s(1)), (1, 3, s(2)), (3, 4, s(5)), (3, 5, s(1))],
        )
        .unwrap();
        let r = k_folding(&t, &[0, 2, 4, 5]).unwrap();
        assert_eq!(r.steps.len(), 3);
        for e in r.lift.edges() {
            let (a, b) = (r.lift_map[e.u], r.lift_map[e.v]);
            assert_eq!(r.final_tree.edge_weight(a, b), Some(&e.w));
        }
        for x in [0, 2, 4, 5] {
            assert_eq!(r.input_map[x], r.z);
        }
    }
}
