//! Edge-weighted undirected graphs and exact shortest paths.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::MetricSpace;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge {edge} references vertex {vertex} but n = {n}")]
    VertexOutOfRange { edge: usize, vertex: usize, n: usize },
    #[error("edge {0} has non-positive weight")]
    NonpositiveWeight(usize),
    #[error("graph is disconnected (vertex {0} unreachable from 0)")]
    Disconnected(usize),
    #[error("graph has no vertices")]
    Empty,
}

/// A kept edge. `index` points into the caller's original edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub w: Scalar,
    pub index: usize,
}

/// Connected graph with positive weights. Parallel edges are collapsed to
/// the lightest one, self-loops are rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<GraphEdge>,
    /// Per vertex: (neighbor, kept-edge position).
    adj: Vec<Vec<(usize, usize)>>,
    /// The edge list as given, parallel edges included.
    input: Vec<(usize, usize, Scalar)>,
}

impl WeightedGraph {
    pub fn new(n: usize, input: &[(usize, usize, Scalar)]) -> Result<WeightedGraph, GraphError> {
        let g = Self::new_unchecked_connectivity(n, input)?;
        if let Some(v) = g.first_unreachable() {
            return Err(GraphError::Disconnected(v));
        }
        Ok(g)
    }

    /// Like [`WeightedGraph::new`] but allows disconnected input.
    pub fn new_unchecked_connectivity(
        n: usize,
        input: &[(usize, usize, Scalar)],
    ) -> Result<WeightedGraph, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut best: BTreeMap<(usize, usize), (Scalar, usize)> = BTreeMap::new();
        for (idx, (u, v, w)) in input.iter().enumerate() {
            for &x in [u, v] {
                if x >= n {
                    return Err(GraphError::VertexOutOfRange { edge: idx, vertex: x, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(*u));
            }
            if !w.is_positive() {
                return Err(GraphError::NonpositiveWeight(idx));
            }
            let key = (*u.min(v), *u.max(v));
            match best.get(&key) {
                Some((old, _)) if old <= w => {}
                _ => {
                    best.insert(key, (w.clone(), idx));
                }
            }
        }
        let mut edges = Vec::with_capacity(best.len());
        let mut adj = vec![Vec::new(); n];
        for ((u, v), (w, index)) in best {
            adj[u].push((v, edges.len()));
            adj[v].push((u, edges.len()));
            edges.push(GraphEdge { u, v, w, index });
        }
        Ok(WeightedGraph { n, edges, adj, input: input.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    /// The edge list as given; kept edges point into it by `index`.
    pub fn input_edges(&self) -> &[(usize, usize, Scalar)] {
        &self.input
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, &GraphEdge)> + '_ {
        self.adj[v].iter().map(move |&(u, e)| (u, &self.edges[e]))
    }

    /// Kept edge between `u` and `v`, if any.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<&GraphEdge> {
        self.adj[u]
            .iter()
            .find(|&&(x, _)| x == v)
            .map(|&(_, e)| &self.edges[e])
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(u, _) in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    /// Edge triples in input form, in kept-edge order.
    pub fn edge_triples(&self) -> Vec<(usize, usize, Scalar)> {
        self.edges.iter().map(|e| (e.u, e.v, e.w.clone())).collect()
    }
}

/// Result of a single-source run restricted to an allowed vertex set.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub dist: Vec<Option<Scalar>>,
    /// Predecessor on a shortest path; ties go to the smaller vertex id.
    pub parent: Vec<Option<usize>>,
}

impl ShortestPaths {
    /// Vertices from `target` back to the source.
    pub fn path_to_source(&self, target: usize) -> Vec<usize> {
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path
    }
}

/// Dijkstra from `source` inside the subgraph induced by `allowed`
/// (`None` means the whole graph).
pub fn dijkstra(g: &WeightedGraph, source: usize, allowed: Option<&[bool]>) -> ShortestPaths {
    let ok = |v: usize| allowed.is_none_or(|a| a[v]);
    let mut dist: Vec<Option<Scalar>> = vec![None; g.n];
    let mut parent = vec![None; g.n];
    let mut done = vec![false; g.n];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(Scalar::ZERO);
    heap.push(Reverse((Scalar::ZERO, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for (u, e) in g.neighbors(v) {
            if !ok(u) || done[u] {
                continue;
            }
            let nd = &d + &e.w;
            let better = match &dist[u] {
                None => true,
                Some(old) => nd < *old || (nd == *old && parent[u].is_some_and(|p| v < p)),
            };
            if better {
                dist[u] = Some(nd.clone());
                parent[u] = Some(v);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    ShortestPaths { dist, parent }
}

/// The shortest-path metric of a connected graph.
pub fn shortest_path_metric(g: &WeightedGraph) -> Result<MetricSpace, GraphError> {
    let n = g.n;
    let mut dist = Vec::with_capacity(n * n);
    for s in 0..n {
        let sp = dijkstra(g, s, None);
        for (v, d) in sp.dist.into_iter().enumerate() {
            dist.push(d.ok_or(GraphError::Disconnected(v))?);
        }
    }
    Ok(MetricSpace::from_trusted(n, dist))
}

/// JSON shape `{"n": .., "edges": [[u, v, w], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, Scalar)>,
}

impl TryFrom<GraphJson> for WeightedGraph {
    type Error = GraphError;

    fn try_from(j: GraphJson) -> Result<Self, Self::Error> {
        WeightedGraph::new(j.n, &j.edges)
    }
}

impl Serialize for WeightedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphJson { n: self.n, edges: self.input.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        GraphJson::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}
