//! Prioritized embedding of a graph into one of its spanning trees via a
//! petal decomposition.
//!
//! A cluster with center `x` repeatedly carves petals around far targets
//! until every remaining vertex is within `3 rad / 4` of `x`. Each petal is a
//! ball in a directed reweighting of the remaining graph; its radius grows
//! until no pair that must stay together is cut. Petals and the leftover
//! core recurse, and each petal hangs off the rest by one edge.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{dijkstra, shortest_path_metric, GraphEdge, ShortestPaths, WeightedGraph};
use crate::metric::MetricSpace;
use crate::priority::{PriorityError, PriorityFunction, PriorityOrdering};
use crate::scalar::Scalar;
use crate::tree::WeightedTree;
use crate::ultrametric::{first_bad_position, BadPairRule};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SpanningTreeError {
    #[error("graph is disconnected (vertex {0} unreachable)")]
    Disconnected(usize),
    #[error(transparent)]
    Ordering(#[from] PriorityError),
    #[error("priority function is certified up to {certified}, need {needed}")]
    AlphaRange { needed: usize, certified: usize },
    #[error("decomposition invariant broken: {0}")]
    Invariant(String),
    #[error("invalid spanning tree: {0}")]
    Invalid(String),
}

/// A vertex set with its center, optional inherited target and radius
/// `max_y d_X(x, y)` measured inside the induced subgraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub vertices: Vec<usize>,
    pub center: usize,
    pub target: Option<usize>,
    pub rad: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Petal {
    /// Sorted member ids.
    pub members: Vec<usize>,
    /// Member of the target-to-center path farthest from the target.
    pub center: usize,
}

/// Directed distances from a target in the reweighted graph on `Y`:
/// `w(u,v) - (d(v,x) - d(u,x))` on every arc, except `w/2` on arcs of the
/// shortest target-to-center path that point towards the center.
#[derive(Debug, Clone)]
pub struct PetalFrame {
    pub target: usize,
    pub center: usize,
    /// Shortest path inside `Y` from the target to the center.
    pub path: Vec<usize>,
    dist: Vec<Option<Scalar>>,
}

impl PetalFrame {
    /// `to_center` must be shortest paths from `center` inside `in_y`.
    pub fn new(g: &WeightedGraph, in_y: &[bool], center: usize, target: usize, to_center: &ShortestPaths) -> PetalFrame {
        let path = to_center.path_to_source(target);
        let n = g.len();
        let mut toward = vec![usize::MAX; n];
        for w in path.windows(2) {
            toward[w[0]] = w[1];
        }
        let dx = |v: usize| to_center.dist[v].as_ref().expect("vertex of Y reaches the center");
        let arc = |a: usize, b: usize, e: &GraphEdge| -> Scalar {
            if toward[a] == b {
                e.w.half()
            } else {
                &e.w - &(dx(b) - dx(a))
            }
        };
        let mut dist: Vec<Option<Scalar>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[target] = Some(Scalar::ZERO);
        heap.push(Reverse((Scalar::ZERO, target)));
        while let Some(Reverse((d, a))) = heap.pop() {
            if done[a] {
                continue;
            }
            done[a] = true;
            for (b, e) in g.neighbors(a) {
                if !in_y[b] || done[b] {
                    continue;
                }
                let nd = &d + &arc(a, b, e);
                if dist[b].as_ref().is_none_or(|old| nd < *old) {
                    dist[b] = Some(nd.clone());
                    heap.push(Reverse((nd, b)));
                }
            }
        }
        PetalFrame { target, center, path, dist }
    }

    /// Directed distance from the target, `None` outside `Y`.
    pub fn distance(&self, v: usize) -> Option<&Scalar> {
        self.dist[v].as_ref()
    }

    pub fn contains(&self, v: usize, r: &Scalar) -> bool {
        self.dist[v].as_ref().is_some_and(|d| d.clone() + d.clone() <= *r)
    }

    /// `P(t, r)`: the directed ball of radius `r/2` around the target.
    pub fn petal(&self, r: &Scalar) -> Petal {
        let members = (0..self.dist.len()).filter(|&v| self.contains(v, r)).collect();
        let at = self.path.iter().rposition(|&v| self.contains(v, r)).expect("target lies in its petal");
        Petal { members, center: self.path[at] }
    }
}

/// `P(t, r)` inside the subgraph induced by `in_y`, with `center` as `x`.
pub fn petal(g: &WeightedGraph, in_y: &[bool], center: usize, t: usize, r: &Scalar) -> Petal {
    let sp = dijkstra(g, center, Some(in_y));
    PetalFrame::new(g, in_y, center, t, &sp).petal(r)
}

/// One carved petal together with its audit data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Carve {
    pub cluster_center: usize,
    pub target: usize,
    pub rad: Scalar,
    pub r: Scalar,
    pub petal: Petal,
    /// Rank that triggered each radius increase.
    pub increments: Vec<usize>,
    /// A vertex at distance `delta` from the petal that is missing from
    /// `P(t, r + 4 delta)`, if any.
    pub proximity_violation: Option<usize>,
}

/// Context shared by every cluster of one decomposition.
pub struct Decomposer<'a> {
    g: &'a WeightedGraph,
    dg: MetricSpace,
    ord: &'a PriorityOrdering,
    alpha: &'a PriorityFunction,
}

impl<'a> Decomposer<'a> {
    pub fn new(
        g: &'a WeightedGraph,
        ord: &'a PriorityOrdering,
        alpha: &'a PriorityFunction,
    ) -> Result<Decomposer<'a>, SpanningTreeError> {
        let n = g.len();
        ord.expect_len(n)?;
        if alpha.n_max() < n {
            return Err(SpanningTreeError::AlphaRange { needed: n, certified: alpha.n_max() });
        }
        let dg = shortest_path_metric(g).map_err(|_| SpanningTreeError::Disconnected(unreachable_from_zero(g)))?;
        Ok(Decomposer { g, dg, ord, alpha })
    }

    pub fn graph_metric(&self) -> &MetricSpace {
        &self.dg
    }

    /// Grows the petal around `frame.target` inside `Y` (listed in `y`)
    /// until no pair of `Y` violating the 128-threshold rule is cut.
    pub fn carve_petal_radius(&self, frame: &PetalFrame, y: &[usize], rad: &Scalar) -> Result<Carve, SpanningTreeError> {
        let mut order = y.to_vec();
        order.sort_by_key(|&v| self.ord.rank(v));
        let rule = BadPairRule { threshold: Scalar::from_int(128), scale: rad.clone() };
        let reach: Vec<Scalar> = order.iter().map(|&v| rule.reach(self.alpha, self.ord.rank(v))).collect();
        let step = |v: usize| rad / &(Scalar::from_int(16) * self.alpha.alpha(self.ord.rank(v)));
        let mut r = Scalar::ZERO;
        let mut increments = Vec::new();
        let mut inside = vec![false; self.g.len()];
        loop {
            for &v in y {
                inside[v] = frame.contains(v, &r);
            }
            match first_bad_position(&order, &inside, &reach, |a, b| self.dg.d(a, b)) {
                None => break,
                Some(a) => {
                    r = &r + &step(order[a]);
                    increments.push(self.ord.rank(order[a]));
                    if increments.len() > 2 * y.len() {
                        return Err(SpanningTreeError::Invariant(format!(
                            "petal around {} kept growing past r = {r}",
                            frame.target
                        )));
                    }
                }
            }
        }
        let petal = frame.petal(&r);
        let proximity_violation = self.proximity_violation(frame, y, &petal, &r);
        Ok(Carve {
            cluster_center: frame.center,
            target: frame.target,
            rad: rad.clone(),
            r,
            petal,
            increments,
            proximity_violation,
        })
    }

    /// Checks that every `y` within distance `delta` of the petal (inside
    /// `Y`) lies in `P(t, r + 4 delta)`.
    fn proximity_violation(&self, frame: &PetalFrame, y: &[usize], petal: &Petal, r: &Scalar) -> Option<usize> {
        let n = self.g.len();
        let mut in_y = vec![false; n];
        y.iter().for_each(|&v| in_y[v] = true);
        let mut dist: Vec<Option<Scalar>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        for &p in &petal.members {
            dist[p] = Some(Scalar::ZERO);
            heap.push(Reverse((Scalar::ZERO, p)));
        }
        while let Some(Reverse((d, a))) = heap.pop() {
            if dist[a].as_ref().is_some_and(|old| *old < d) {
                continue;
            }
            for (b, e) in self.g.neighbors(a) {
                let nd = &d + &e.w;
                if in_y[b] && dist[b].as_ref().is_none_or(|old| nd < *old) {
                    dist[b] = Some(nd.clone());
                    heap.push(Reverse((nd, b)));
                }
            }
        }
        y.iter().copied().find(|&v| {
            let delta = dist[v].as_ref().expect("Y is connected");
            let grown = r + &(Scalar::from_int(4) * delta);
            !frame.contains(v, &grown)
        })
    }

    /// Decomposes `cluster_vertices` around `center`, returning the spanning
    /// tree of the cluster and the audit trail of every sub-cluster.
    fn decompose(&self, vertices: Vec<usize>, center: usize, target: Option<usize>) -> Result<Built, SpanningTreeError> {
        let n = self.g.len();
        let mut in_x = vec![false; n];
        vertices.iter().for_each(|&v| in_x[v] = true);
        let sp = dijkstra(self.g, center, Some(&in_x));
        if let Some(&v) = vertices.iter().find(|&&v| sp.dist[v].is_none()) {
            return Err(SpanningTreeError::Invariant(format!("cluster around {center} does not reach {v}")));
        }
        let rad = vertices.iter().map(|&v| sp.dist[v].clone().expect("reachable")).max().expect("nonempty");
        let cluster = Cluster { vertices: vertices.clone(), center, target, rad: rad.clone() };

        if vertices.len() <= 2 {
            // tiny clusters take the shortest-path tree from the center
            let edges = vertices
                .iter()
                .filter(|&&v| v != center)
                .map(|&v| self.g.edge_between(v, sp.parent[v].expect("non-center has a parent")).cloned().expect("edge"))
                .collect();
            return Ok(self.finish(cluster, edges, Vec::new(), Vec::new()));
        }

        let far = Scalar::new(3, 4) * &rad;
        let mut in_y = in_x.clone();
        let mut y: Vec<usize> = vertices.clone();
        let mut carves: Vec<Carve> = Vec::new();
        let mut links: Vec<GraphEdge> = Vec::new();
        loop {
            let sp_y = dijkstra(self.g, center, Some(&in_y));
            let dy = |v: usize| sp_y.dist[v].as_ref().expect("Y stays connected");
            // the first petal follows the inherited target's path
            let inherited = if carves.is_empty() {
                target.filter(|&t| in_y[t]).and_then(|t| {
                    let mut path = sp_y.path_to_source(t);
                    path.reverse();
                    path.into_iter().find(|&v| *dy(v) >= far)
                })
            } else {
                None
            };
            let t_i = match inherited.or_else(|| {
                y.iter().copied().filter(|&v| *dy(v) >= far).max_by(|&a, &b| dy(a).cmp(dy(b)).then(b.cmp(&a)))
            }) {
                Some(t) => t,
                None => break,
            };
            let frame = PetalFrame::new(self.g, &in_y, center, t_i, &sp_y);
            let carve = self.carve_petal_radius(&frame, &y, &rad)?;
            if carve.petal.members.contains(&center) {
                return Err(SpanningTreeError::Invariant(format!("petal around {t_i} swallowed the center {center}")));
            }
            // hang the petal by the path edge leaving its center
            let at = frame.path.iter().position(|&v| v == carve.petal.center).expect("center on path");
            let link = self.g.edge_between(frame.path[at], frame.path[at + 1]).cloned().expect("path edge");
            for &v in &carve.petal.members {
                in_y[v] = false;
            }
            y.retain(|&v| in_y[v]);
            links.push(link);
            carves.push(carve);
        }

        // the core keeps the target only if it was not carved away
        let core_target = target.filter(|&t| in_y[t]);
        let mut jobs: Vec<(Vec<usize>, usize, Option<usize>)> =
            carves.iter().map(|c| (c.petal.members.clone(), c.petal.center, Some(c.target))).collect();
        jobs.push((y, center, core_target));
        let built: Vec<Built> = jobs
            .into_par_iter()
            .map(|(vs, c, t)| self.decompose(vs, c, t))
            .collect::<Result<_, _>>()?;

        let mut edges = links;
        let mut clusters = Vec::new();
        let mut all_carves = carves;
        for b in built {
            edges.extend(b.edges);
            clusters.extend(b.clusters);
            all_carves.extend(b.carves);
        }
        Ok(self.finish(cluster, edges, clusters, all_carves))
    }

    fn finish(&self, cluster: Cluster, edges: Vec<GraphEdge>, mut clusters: Vec<ClusterTrace>, carves: Vec<Carve>) -> Built {
        let tree_radius = tree_radius(self.g.len(), &edges, &cluster);
        clusters.push(ClusterTrace { cluster, tree_radius });
        Built { edges, clusters, carves }
    }
}

fn unreachable_from_zero(g: &WeightedGraph) -> usize {
    let sp = dijkstra(g, 0, None);
    sp.dist.iter().position(Option::is_none).unwrap_or(0)
}

/// Largest distance from the cluster center within the cluster's tree edges.
fn tree_radius(n: usize, edges: &[GraphEdge], cluster: &Cluster) -> Option<Scalar> {
    let mut adj: Vec<Vec<(usize, &Scalar)>> = vec![Vec::new(); n];
    for e in edges {
        adj[e.u].push((e.v, &e.w));
        adj[e.v].push((e.u, &e.w));
    }
    let mut dist: Vec<Option<Scalar>> = vec![None; n];
    dist[cluster.center] = Some(Scalar::ZERO);
    let mut stack = vec![cluster.center];
    while let Some(a) = stack.pop() {
        let da = dist[a].clone().expect("visited");
        for &(b, w) in &adj[a] {
            if dist[b].is_none() {
                dist[b] = Some(&da + w);
                stack.push(b);
            }
        }
    }
    cluster.vertices.iter().map(|&v| dist[v].clone()).collect::<Option<Vec<_>>>()?.into_iter().max()
}

struct Built {
    edges: Vec<GraphEdge>,
    clusters: Vec<ClusterTrace>,
    carves: Vec<Carve>,
}

/// A recursion cluster and the radius of its tree from its center
/// (`None` if the cluster's edges do not span it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTrace {
    pub cluster: Cluster,
    pub tree_radius: Option<Scalar>,
}

/// Spanning tree given by input edge indices, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub n: usize,
    pub edges: Vec<usize>,
}

impl SpanningTree {
    /// Checks the tree against `g`: `n - 1` distinct kept edges that connect
    /// every vertex.
    pub fn validate(&self, g: &WeightedGraph) -> Result<WeightedTree, SpanningTreeError> {
        let bad = |s: String| Err(SpanningTreeError::Invalid(s));
        if self.n != g.len() {
            return bad(format!("tree has {} vertices, graph has {}", self.n, g.len()));
        }
        let mut triples = Vec::with_capacity(self.edges.len());
        for (pos, &idx) in self.edges.iter().enumerate() {
            if pos > 0 && self.edges[pos - 1] >= idx {
                return bad("edge indices must be strictly increasing".into());
            }
            match g.edges().iter().find(|e| e.index == idx) {
                Some(e) => triples.push((e.u, e.v, e.w.clone())),
                None => return bad(format!("input edge {idx} is not an edge of the graph")),
            }
        }
        WeightedTree::from_edges(self.n, triples).map_err(|e| SpanningTreeError::Invalid(e.to_string()))
    }
}

/// The spanning tree with the full audit trail of the decomposition.
#[derive(Debug, Clone)]
pub struct SpanningTreeBuild {
    pub tree: SpanningTree,
    pub clusters: Vec<ClusterTrace>,
    pub carves: Vec<Carve>,
}

pub fn petal_decomposition_traced(
    g: &WeightedGraph,
    ord: &PriorityOrdering,
    alpha: &PriorityFunction,
) -> Result<SpanningTreeBuild, SpanningTreeError> {
    let dec = Decomposer::new(g, ord, alpha)?;
    let root = ord.point(1);
    let built = dec.decompose((0..g.len()).collect(), root, None)?;
    let mut edges: Vec<usize> = built.edges.iter().map(|e| e.index).collect();
    edges.sort_unstable();
    let tree = SpanningTree { n: g.len(), edges };
    tree.validate(g)?;
    Ok(SpanningTreeBuild { tree, clusters: built.clusters, carves: built.carves })
}

pub fn petal_decomposition_spanning_tree(
    g: &WeightedGraph,
    ord: &PriorityOrdering,
    alpha: &PriorityFunction,
) -> Result<SpanningTree, SpanningTreeError> {
    petal_decomposition_traced(g, ord, alpha).map(|b| b.tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priority::default_priority_function;

    fn int_graph(n: usize, edges: &[(usize, usize, i64)]) -> WeightedGraph {
        let e: Vec<_> = edges.iter().map(|&(u, v, w)| (u, v, Scalar::from_int(w))).collect();
        WeightedGraph::new(n, &e).unwrap()
    }

    #[test]
    fn single_edge() {
        let g = int_graph(2, &[(0, 1, 3)]);
        let t = petal_decomposition_spanning_tree(&g, &PriorityOrdering::identity(2), &default_priority_function(2)).unwrap();
        assert_eq!(t.edges, vec![0]);
    }

    #[test]
    fn tree_input_is_returned() {
        let g = int_graph(6, &[(0, 1, 2), (1, 2, 1), (1, 3, 5), (3, 4, 1), (3, 5, 2)]);
        let ord = PriorityOrdering::new(vec![4, 0, 2, 5, 1, 3]).unwrap();
        let t = petal_decomposition_spanning_tree(&g, &ord, &default_priority_function(6)).unwrap();
        assert_eq!(t.edges, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_radius_petal_is_target() {
        let g = int_graph(3, &[(0, 1, 1), (1, 2, 1)]);
        let p = petal(&g, &[true; 3], 0, 2, &Scalar::ZERO);
        assert_eq!(p, Petal { members: vec![2], center: 2 });
    }

    /// Bellman-Ford over the explicit arc list of the reweighted path graph.
    #[test]
    fn unit_path_matches_directed_oracle() {
        let n = 7;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1)).collect();
        let g = int_graph(n, &edges);
        let (x, t) = (0usize, n - 1);
        // d(v, x) = v on the path; every edge lies on the t-x path
        let mut arcs = Vec::new();
        for i in 0..n - 1 {
            arcs.push((i + 1, i, Scalar::new(1, 2)));
            arcs.push((i, i + 1, Scalar::from_int(1) - Scalar::from_int(1)));
        }
        let mut oracle: Vec<Option<Scalar>> = vec![None; n];
        oracle[t] = Some(Scalar::ZERO);
        for _ in 0..n {
            for (a, b, w) in &arcs {
                if let Some(da) = oracle[*a].clone() {
                    let nd = da + w.clone();
                    if oracle[*b].as_ref().is_none_or(|old| nd < *old) {
                        oracle[*b] = Some(nd);
                    }
                }
            }
        }
        let sp = dijkstra(&g, x, None);
        let frame = PetalFrame::new(&g, &[true; 7], x, t, &sp);
        for v in 0..n {
            assert_eq!(frame.distance(v), oracle[v].as_ref());
        }
        for r in [0, 1, 2, 3, 5] {
            let r = Scalar::from_int(r);
            let p = frame.petal(&r);
            let expect: Vec<usize> =
                (0..n).filter(|&v| oracle[v].clone().unwrap() * Scalar::from_int(2) <= r).collect();
            assert_eq!(p.members, expect);
            assert_eq!(p.center, *expect.first().unwrap());
        }
    }

    #[test]
    fn petals_are_nested() {
        let g = int_graph(5, &[(0, 1, 2), (1, 2, 2), (2, 3, 1), (3, 4, 3), (0, 4, 7), (1, 3, 4)]);
        let sp = dijkstra(&g, 0, None);
        let frame = PetalFrame::new(&g, &[true; 5], 0, 3, &sp);
        let mut prev: Vec<usize> = Vec::new();
        for r in 0..12 {
            let p = frame.petal(&Scalar::from_int(r));
            assert!(prev.iter().all(|v| p.members.contains(v)));
            prev = p.members;
        }
    }

    #[test]
    fn spanning_tree_json_round_trip() {
        let t = SpanningTree { n: 3, edges: vec![0, 2] };
        let back: SpanningTree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        let g = int_graph(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
        assert!(t.validate(&g).is_ok());
        assert!(SpanningTree { n: 3, edges: vec![0] }.validate(&g).is_err());
    }
}
