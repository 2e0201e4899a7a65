//! Seeded random instances.
//!
//! - trees: vertex `i` attaches to a uniform earlier vertex, integer weight
//!   uniform in `1..=max_weight`;
//! - graphs: a random attachment tree plus every other pair independently
//!   with probability `extra_edge_prob`, weights `a/b` with `a` uniform in
//!   `1..=max_numer` and `b` uniform in `1..=max_denom`;
//! - metrics: the shortest-path metric of such a graph.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{shortest_path_metric, WeightedGraph};
use crate::metric::MetricSpace;
use crate::priority::PriorityOrdering;
use crate::scalar::Scalar;
use crate::tree::WeightedTree;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenError {
    #[error("instance size must be at least 1")]
    EmptyInstance,
    #[error("invalid shape parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphShape {
    pub extra_edge_prob: f64,
    pub max_numer: i64,
    pub max_denom: i64,
}

impl Default for GraphShape {
    fn default() -> Self {
        GraphShape { extra_edge_prob: 0.1, max_numer: 100, max_denom: 4 }
    }
}

impl GraphShape {
    fn check(&self) -> Result<(), GenError> {
        if !(0.0..=1.0).contains(&self.extra_edge_prob) {
            return Err(GenError::InvalidParams(format!("extra edge probability {}", self.extra_edge_prob)));
        }
        if self.max_numer < 1 || self.max_denom < 1 {
            return Err(GenError::InvalidParams("weight bounds must be positive".into()));
        }
        Ok(())
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tree(n: usize, max_weight: i64, seed: u64) -> Result<WeightedTree, GenError> {
    if n == 0 {
        return Err(GenError::EmptyInstance);
    }
    if max_weight < 1 {
        return Err(GenError::InvalidParams("max weight must be at least 1".into()));
    }
    let mut r = rng(seed);
    let edges = (1..n)
        .map(|i| (r.gen_range(0..i), i, Scalar::from_int(r.gen_range(1..=max_weight))))
        .collect();
    Ok(WeightedTree::from_edges(n, edges).expect("attachment trees are trees"))
}

pub fn random_graph(n: usize, shape: &GraphShape, seed: u64) -> Result<WeightedGraph, GenError> {
    if n == 0 {
        return Err(GenError::EmptyInstance);
    }
    shape.check()?;
    let mut r = rng(seed);
    let weight = |r: &mut ChaCha8Rng| Scalar::new(r.gen_range(1..=shape.max_numer), r.gen_range(1..=shape.max_denom));
    let mut edges = Vec::new();
    let mut tree_edge = vec![usize::MAX; n];
    for i in 1..n {
        let p = r.gen_range(0..i);
        tree_edge[i] = p;
        edges.push((p, i, weight(&mut r)));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if tree_edge[v] != u && r.gen_bool(shape.extra_edge_prob) {
                edges.push((u, v, weight(&mut r)));
            }
        }
    }
    Ok(WeightedGraph::new(n, &edges).expect("graph contains a spanning tree"))
}

pub fn random_metric(n: usize, shape: &GraphShape, seed: u64) -> Result<MetricSpace, GenError> {
    let g = random_graph(n, shape, seed)?;
    Ok(shortest_path_metric(&g).expect("generated graphs are connected"))
}

pub fn random_ordering(n: usize, seed: u64) -> PriorityOrdering {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng(seed));
    PriorityOrdering::new(perm).expect("shuffle keeps a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::validate_metric;

    #[test]
    fn sizes_and_determinism() {
        assert_eq!(random_tree(1, 5, 0).unwrap().len(), 1);
        let t = random_tree(2, 5, 0).unwrap();
        assert_eq!(t.edges().len(), 1);
        let a = random_graph(50, &GraphShape::default(), 7).unwrap();
        let b = random_graph(50, &GraphShape::default(), 7).unwrap();
        assert_eq!(a, b);
        let m = random_metric(1, &GraphShape::default(), 3).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(random_tree(0, 5, 0), Err(GenError::EmptyInstance));
    }

    #[test]
    fn metrics_validate() {
        let m = random_metric(20, &GraphShape::default(), 11).unwrap();
        assert!(validate_metric(m.rows()).is_ok());
    }
}
