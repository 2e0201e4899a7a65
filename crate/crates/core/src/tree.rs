//! Edge-weighted trees whose vertices may be Steiner (auxiliary) points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::MetricSpace;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree has no vertices")]
    Empty,
    #[error("a tree on {n} vertices needs {} edges, got {edges}", n - 1)]
    EdgeCount { n: usize, edges: usize },
    #[error("edge {edge} references vertex {vertex} but n = {n}")]
    VertexOutOfRange { edge: usize, vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge {0} has non-positive weight")]
    NonpositiveWeight(usize),
    #[error("edges do not form a tree (vertex {0} unreachable)")]
    NotATree(usize),
    #[error("vertex ids in the vertex list must be 0..n in order (found {0})")]
    BadVertexList(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEdge {
    pub u: usize,
    pub v: usize,
    pub w: Scalar,
}

/// A tree over vertices `0..len()`. Each vertex is real or Steiner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedTree {
    steiner: Vec<bool>,
    edges: Vec<TreeEdge>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl WeightedTree {
    pub fn new(steiner: Vec<bool>, edges: Vec<(usize, usize, Scalar)>) -> Result<WeightedTree, TreeError> {
        let n = steiner.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        if edges.len() + 1 != n {
            return Err(TreeError::EdgeCount { n, edges: edges.len() });
        }
        for (i, (u, v, w)) in edges.iter().enumerate() {
            for &x in [u, v] {
                if x >= n {
                    return Err(TreeError::VertexOutOfRange { edge: i, vertex: x, n });
                }
            }
            if u == v {
                return Err(TreeError::SelfLoop(*u));
            }
            if !w.is_positive() {
                return Err(TreeError::NonpositiveWeight(i));
            }
        }
        let t = Self::from_parts(steiner, edges);
        let order = t.preorder(0);
        if order.len() != n {
            let mut seen = vec![false; n];
            order.iter().for_each(|&v| seen[v] = true);
            return Err(TreeError::NotATree(seen.iter().position(|s| !s).unwrap_or(0)));
        }
        Ok(t)
    }

    /// A tree whose vertices are all real.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize, Scalar)>) -> Result<WeightedTree, TreeError> {
        Self::new(vec![false; n], edges)
    }

    pub(crate) fn from_parts(steiner: Vec<bool>, edges: Vec<(usize, usize, Scalar)>) -> WeightedTree {
        let mut adj = vec![Vec::new(); steiner.len()];
        let edges: Vec<TreeEdge> = edges
            .into_iter()
            .enumerate()
            .map(|(i, (u, v, w))| {
                adj[u].push((v, i));
                adj[v].push((u, i));
                TreeEdge { u, v, w }
            })
            .collect();
        WeightedTree { steiner, edges, adj }
    }

    pub fn len(&self) -> usize {
        self.steiner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steiner.is_empty()
    }

    pub fn is_steiner(&self, v: usize) -> bool {
        self.steiner[v]
    }

    pub fn steiner_flags(&self) -> &[bool] {
        &self.steiner
    }

    /// Ids of real vertices, ascending.
    pub fn real_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| !self.steiner[v]).collect()
    }

    pub fn n_real(&self) -> usize {
        self.steiner.iter().filter(|s| !**s).count()
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn edge_triples(&self) -> Vec<(usize, usize, Scalar)> {
        self.edges.iter().map(|e| (e.u, e.v, e.w.clone())).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// `(neighbor, edge weight)` pairs.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, &Scalar)> + '_ {
        self.adj[v].iter().map(move |&(u, e)| (u, &self.edges[e].w))
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<&Scalar> {
        self.adj[u].iter().find(|&&(x, _)| x == v).map(|&(_, e)| &self.edges[e].w)
    }

    fn preorder(&self, root: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(u, _) in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        order
    }

    /// Distances and parents from `root`, restricted to vertices with
    /// `allowed[v]` when a mask is given. Unreached vertices get `None`.
    pub fn distances_within(
        &self,
        root: usize,
        allowed: Option<&[bool]>,
    ) -> (Vec<Option<Scalar>>, Vec<Option<usize>>) {
        let mut dist: Vec<Option<Scalar>> = vec![None; self.len()];
        let mut parent = vec![None; self.len()];
        dist[root] = Some(Scalar::ZERO);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let dv = dist[v].clone().expect("pushed vertices have a distance");
            for &(u, e) in &self.adj[v] {
                if dist[u].is_none() && allowed.is_none_or(|a| a[u]) {
                    dist[u] = Some(&dv + &self.edges[e].w);
                    parent[u] = Some(v);
                    stack.push(u);
                }
            }
        }
        (dist, parent)
    }

    pub fn distances_from(&self, root: usize) -> Vec<Scalar> {
        self.distances_within(root, None)
            .0
            .into_iter()
            .map(|d| d.expect("trees are connected"))
            .collect()
    }

    pub fn distance(&self, u: usize, v: usize) -> Scalar {
        self.distances_from(u).swap_remove(v)
    }

    /// Vertices of the unique `u`–`v` path, starting at `u`.
    pub fn path(&self, u: usize, v: usize) -> Vec<usize> {
        let (_, parent) = self.distances_within(v, None);
        let mut path = vec![u];
        let mut cur = u;
        while let Some(p) = parent[cur] {
            path.push(p);
            cur = p;
        }
        path
    }

    /// All-pairs distances as a flat row-major matrix.
    pub fn all_pairs(&self) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(self.len() * self.len());
        for v in 0..self.len() {
            out.extend(self.distances_from(v));
        }
        out
    }

    /// The metric induced on the real vertices, in ascending id order.
    pub fn real_metric(&self) -> MetricSpace {
        let real = self.real_vertices();
        let mut dist = Vec::with_capacity(real.len() * real.len());
        for &a in &real {
            let row = self.distances_from(a);
            dist.extend(real.iter().map(|&b| row[b].clone()));
        }
        MetricSpace::from_trusted(real.len(), dist)
    }

    /// Splits edge `u`–`v` with Steiner vertices at the given distances from
    /// `u` (strictly increasing, strictly inside the edge). Returns the new
    /// vertex ids in the same order.
    pub fn subdivide(&mut self, u: usize, v: usize, offsets: &[Scalar]) -> Vec<usize> {
        if offsets.is_empty() {
            return Vec::new();
        }
        let e = self.adj[u]
            .iter()
            .find(|&&(x, _)| x == v)
            .map(|&(_, e)| e)
            .expect("subdivided edge exists");
        let w = self.edges[e].w.clone();
        let first = self.len();
        let ids: Vec<usize> = (first..first + offsets.len()).collect();
        self.steiner.extend(std::iter::repeat_n(true, offsets.len()));
        self.adj.extend(std::iter::repeat_with(Vec::new).take(offsets.len()));
        // edge e becomes u -- ids[0]
        self.edges[e] = TreeEdge { u, v: ids[0], w: offsets[0].clone() };
        for slot in self.adj[u].iter_mut() {
            if slot.1 == e {
                slot.0 = ids[0];
            }
        }
        self.adj[ids[0]].push((u, e));
        self.adj[v].retain(|&(_, x)| x != e);
        let mut chain: Vec<(usize, usize, Scalar)> = Vec::new();
        for k in 1..offsets.len() {
            chain.push((ids[k - 1], ids[k], &offsets[k] - &offsets[k - 1]));
        }
        chain.push((*ids.last().unwrap(), v, &w - offsets.last().unwrap()));
        for (a, b, w) in chain {
            debug_assert!(w.is_positive());
            let idx = self.edges.len();
            self.adj[a].push((b, idx));
            self.adj[b].push((a, idx));
            self.edges.push(TreeEdge { u: a, v: b, w });
        }
        ids
    }
}

/// JSON shape `{"n_real", "vertices": [{"id", "steiner"}], "edges": [[u, v, w]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeJson {
    pub n_real: usize,
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<(usize, usize, Scalar)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: usize,
    pub steiner: bool,
}

impl From<&WeightedTree> for TreeJson {
    fn from(t: &WeightedTree) -> Self {
        TreeJson {
            n_real: t.n_real(),
            vertices: (0..t.len()).map(|id| VertexJson { id, steiner: t.steiner[id] }).collect(),
            edges: t.edge_triples(),
        }
    }
}

impl TryFrom<TreeJson> for WeightedTree {
    type Error = TreeError;

    fn try_from(j: TreeJson) -> Result<Self, Self::Error> {
        for (i, v) in j.vertices.iter().enumerate() {
            if v.id != i {
                return Err(TreeError::BadVertexList(v.id));
            }
        }
        WeightedTree::new(j.vertices.iter().map(|v| v.steiner).collect(), j.edges)
    }
}

impl Serialize for WeightedTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TreeJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        TreeJson::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}
