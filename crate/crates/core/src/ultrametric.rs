//! Prioritized embedding of a finite metric into a single ultrametric.
//!
//! Each cluster is split by growing a ball around one end of a diametral
//! pair until no pair that must stay together is cut, then both sides
//! recurse with their induced orderings. The split cluster's diameter
//! becomes the label of the new internal node.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::MetricSpace;
use crate::priority::{PriorityError, PriorityFunction, PriorityOrdering};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum UltrametricError {
    #[error("cluster of {0} points has diameter 0")]
    DegenerateDiameter(usize),
    #[error("d(u, v) is not the cluster diameter")]
    NotDiametral,
    #[error("priority function is certified up to {certified}, need {needed}")]
    AlphaRange { needed: usize, certified: usize },
    #[error(transparent)]
    Ordering(#[from] PriorityError),
    #[error("ball growth reached radius {radius} >= diameter {diameter}")]
    Overgrown { radius: Scalar, diameter: Scalar },
    #[error("malformed ultrametric tree: {0}")]
    Malformed(String),
}

/// A pair is bad when it is separated and
/// `threshold * min(alpha(i), alpha(j)) * d < scale`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadPairRule {
    pub threshold: Scalar,
    pub scale: Scalar,
}

impl BadPairRule {
    /// Largest distance at which a pair whose better rank is `j` is bad
    /// (exclusive).
    pub fn reach(&self, alpha: &PriorityFunction, j: usize) -> Scalar {
        &self.scale / (&self.threshold * alpha.alpha(j))
    }

    pub fn is_bad(&self, alpha: &PriorityFunction, ji: usize, jj: usize, d: &Scalar) -> bool {
        *d < self.reach(alpha, ji.min(jj))
    }
}

/// Position in `order` (points listed by decreasing priority) of the first
/// point that forms a bad pair with a point on the other side of `inside`.
/// `reach[pos]` is the bad-pair distance bound for `order[pos]`.
pub(crate) fn first_bad_position<'a>(
    order: &[usize],
    inside: &[bool],
    reach: &[Scalar],
    dist: impl Fn(usize, usize) -> &'a Scalar,
) -> Option<usize> {
    // a bad pair is found at its better-ranked member, so only later partners are checked
    (0..order.len()).find(|&a| {
        let p = order[a];
        order[a + 1..].iter().any(|&q| inside[p] != inside[q] && *dist(p, q) < reach[a])
    })
}

/// Outcome of one ball-growth split, in the cluster's local ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
    pub radius: Scalar,
    pub diameter: Scalar,
    /// Rank that triggered each radius increase.
    pub increments: Vec<usize>,
}

/// Splits the cluster `m` (local ids, ordering `ord`) with `u` inside the
/// ball and `v` outside.
pub fn grow_ultrametric_partition(
    m: &MetricSpace,
    ord: &PriorityOrdering,
    alpha: &PriorityFunction,
    u: usize,
    v: usize,
) -> Result<Partition, UltrametricError> {
    let n = m.len();
    ord.expect_len(n)?;
    if alpha.n_max() < n {
        return Err(UltrametricError::AlphaRange { needed: n, certified: alpha.n_max() });
    }
    let diameter = m.diameter();
    if diameter.is_zero() {
        return Err(UltrametricError::DegenerateDiameter(n));
    }
    if *m.d(u, v) != diameter {
        return Err(UltrametricError::NotDiametral);
    }
    let rule = BadPairRule { threshold: Scalar::from_int(2), scale: diameter.clone() };
    let reach: Vec<Scalar> = (1..=n).map(|j| rule.reach(alpha, j)).collect();
    let mut radius = Scalar::ZERO;
    let mut increments = Vec::new();
    let mut inside = vec![false; n];
    loop {
        for (x, slot) in inside.iter_mut().enumerate() {
            *slot = *m.d(u, x) <= radius;
        }
        match first_bad_position(ord.perm(), &inside, &reach, |a, b| m.d(a, b)).map(|a| a + 1) {
            None => break,
            Some(j) => {
                radius = &radius + &reach[j - 1];
                increments.push(j);
                if radius >= diameter {
                    return Err(UltrametricError::Overgrown { radius, diameter });
                }
            }
        }
    }
    let (x1, x2) = (0..n).partition(|&x| inside[x]);
    Ok(Partition { x1, x2, radius, diameter, increments })
}

/// Labelled rooted tree whose leaves are the points; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "UltrametricJson", into = "UltrametricJson")]
pub struct UltrametricTree {
    nodes: Vec<UltrametricNode>,
    leaf_of: Vec<usize>,
    parent: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UltrametricNode {
    pub id: usize,
    pub label: Scalar,
    pub children: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct UltrametricJson {
    nodes: Vec<UltrametricNode>,
    leaf_of: Vec<usize>,
}

impl TryFrom<UltrametricJson> for UltrametricTree {
    type Error = UltrametricError;
    fn try_from(j: UltrametricJson) -> Result<Self, Self::Error> {
        UltrametricTree::new(j.nodes, j.leaf_of)
    }
}

impl From<UltrametricTree> for UltrametricJson {
    fn from(t: UltrametricTree) -> Self {
        UltrametricJson { nodes: t.nodes, leaf_of: t.leaf_of }
    }
}

impl UltrametricTree {
    /// Checks ids, a single root at node 0, zero-labelled leaves matching
    /// `leaf_of` one to one, and labels that never grow downwards.
    pub fn new(nodes: Vec<UltrametricNode>, leaf_of: Vec<usize>) -> Result<UltrametricTree, UltrametricError> {
        let bad = |s: String| Err(UltrametricError::Malformed(s));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut parent = vec![None; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node at position {i} has id {}", node.id));
            }
            if node.label.is_negative() {
                return bad(format!("node {i} has a negative label"));
            }
            for &c in &node.children {
                if c >= nodes.len() || c == 0 || parent[c].is_some() {
                    return bad(format!("child {c} of node {i} is invalid or shared"));
                }
                if nodes[c].label > node.label {
                    return bad(format!("child {c} has a larger label than node {i}"));
                }
                parent[c] = Some(i);
            }
        }
        if let Some(orphan) = (1..nodes.len()).find(|&i| parent[i].is_none()) {
            return bad(format!("node {orphan} is unreachable"));
        }
        let mut owner = vec![None; nodes.len()];
        for (p, &leaf) in leaf_of.iter().enumerate() {
            if leaf >= nodes.len() || !nodes[leaf].children.is_empty() || owner[leaf].is_some() {
                return bad(format!("point {p} maps to an invalid leaf {leaf}"));
            }
            owner[leaf] = Some(p);
        }
        for (i, node) in nodes.iter().enumerate() {
            let leaf = node.children.is_empty();
            if leaf && owner[i].is_none() {
                return bad(format!("leaf {i} carries no point"));
            }
            if leaf != node.label.is_zero() {
                return bad(format!("node {i}: label 0 must mark exactly the leaves"));
            }
        }
        // parent pointers from a single root with every node reached cannot cycle
        let mut seen = 1;
        let mut stack = vec![0];
        let mut visited = vec![false; nodes.len()];
        visited[0] = true;
        while let Some(x) = stack.pop() {
            for &c in &nodes[x].children {
                if !visited[c] {
                    visited[c] = true;
                    seen += 1;
                    stack.push(c);
                }
            }
        }
        if seen != nodes.len() {
            return bad("children lists contain a cycle".into());
        }
        Ok(UltrametricTree { nodes, leaf_of, parent })
    }

    pub fn nodes(&self) -> &[UltrametricNode] {
        &self.nodes
    }

    pub fn leaf_of(&self, point: usize) -> usize {
        self.leaf_of[point]
    }

    pub fn points(&self) -> usize {
        self.leaf_of.len()
    }

    fn depth(&self, mut x: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[x] {
            x = p;
            d += 1;
        }
        d
    }

    /// Label of the lowest common ancestor of the two points' leaves.
    pub fn distance(&self, a: usize, b: usize) -> &Scalar {
        let (mut x, mut y) = (self.leaf_of[a], self.leaf_of[b]);
        let (mut dx, mut dy) = (self.depth(x), self.depth(y));
        while dx > dy {
            x = self.parent[x].expect("deeper node has a parent");
            dx -= 1;
        }
        while dy > dx {
            y = self.parent[y].expect("deeper node has a parent");
            dy -= 1;
        }
        while x != y {
            x = self.parent[x].expect("distinct nodes below the root");
            y = self.parent[y].expect("distinct nodes below the root");
        }
        &self.nodes[x].label
    }

    /// All leaf-to-leaf distances, indexed by point.
    pub fn distance_matrix(&self) -> Vec<Vec<Scalar>> {
        let n = self.points();
        let mut owner = vec![usize::MAX; self.nodes.len()];
        for (p, &leaf) in self.leaf_of.iter().enumerate() {
            owner[leaf] = p;
        }
        let mut out = vec![vec![Scalar::ZERO; n]; n];
        self.collect(0, &owner, &mut out);
        out
    }

    fn collect(&self, x: usize, owner: &[usize], out: &mut [Vec<Scalar>]) -> Vec<usize> {
        let node = &self.nodes[x];
        if node.children.is_empty() {
            return vec![owner[x]];
        }
        let mut all: Vec<usize> = Vec::new();
        for &c in &node.children {
            let part = self.collect(c, owner, out);
            for &a in &all {
                for &b in &part {
                    out[a][b] = node.label.clone();
                    out[b][a] = node.label.clone();
                }
            }
            all.extend(part);
        }
        all
    }
}

/// One internal node's split, in global point ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTrace {
    pub cluster: Vec<usize>,
    pub u: usize,
    pub v: usize,
    pub radius: Scalar,
    pub diameter: Scalar,
    pub increments: Vec<usize>,
}

/// Diametral pair with the lexicographically smallest `(u, v)`, `u < v`.
fn diametral_pair(m: &MetricSpace) -> (usize, usize) {
    let diameter = m.diameter();
    let n = m.len();
    (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .find(|&(a, b)| *m.d(a, b) == diameter)
        .expect("cluster has at least two points")
}

struct Subtree {
    nodes: Vec<UltrametricNode>,
    /// (global point, local node id)
    leaves: Vec<(usize, usize)>,
    trace: Vec<SplitTrace>,
}

fn build_cluster(
    m: &MetricSpace,
    ord: &PriorityOrdering,
    alpha: &PriorityFunction,
    points: &[usize],
) -> Result<Subtree, UltrametricError> {
    if points.len() == 1 {
        return Ok(Subtree {
            nodes: vec![UltrametricNode { id: 0, label: Scalar::ZERO, children: Vec::new() }],
            leaves: vec![(points[0], 0)],
            trace: Vec::new(),
        });
    }
    let local = m.restrict(points);
    let local_ord = ord.induced(points);
    let (u, v) = diametral_pair(&local);
    let part = grow_ultrametric_partition(&local, &local_ord, alpha, u, v)?;
    let side = |ids: &[usize]| ids.iter().map(|&i| points[i]).collect::<Vec<_>>();
    let (p1, p2) = (side(&part.x1), side(&part.x2));
    let (left, right) = rayon::join(
        || build_cluster(m, ord, alpha, &p1),
        || build_cluster(m, ord, alpha, &p2),
    );
    let (left, right) = (left?, right?);

    let mut nodes = vec![UltrametricNode { id: 0, label: part.diameter.clone(), children: Vec::new() }];
    let mut leaves = Vec::with_capacity(points.len());
    let mut trace = vec![SplitTrace {
        cluster: points.to_vec(),
        u: points[u],
        v: points[v],
        radius: part.radius,
        diameter: part.diameter,
        increments: part.increments,
    }];
    for sub in [left, right] {
        let offset = nodes.len();
        nodes[0].children.push(offset);
        nodes.extend(sub.nodes.into_iter().map(|mut x| {
            x.id += offset;
            x.children.iter_mut().for_each(|c| *c += offset);
            x
        }));
        leaves.extend(sub.leaves.into_iter().map(|(p, id)| (p, id + offset)));
        trace.extend(sub.trace);
    }
    Ok(Subtree { nodes, leaves, trace })
}

/// The ultrametric together with every split it performed.
pub fn build_ultrametric_traced(
    m: &MetricSpace,
    ord: &PriorityOrdering,
    alpha: &PriorityFunction,
) -> Result<(UltrametricTree, Vec<SplitTrace>), UltrametricError> {
    let n = m.len();
    ord.expect_len(n)?;
    if n == 0 {
        return Err(UltrametricError::Malformed("empty metric".into()));
    }
    if alpha.n_max() < n {
        return Err(UltrametricError::AlphaRange { needed: n, certified: alpha.n_max() });
    }
    let all: Vec<usize> = (0..n).collect();
    let sub = build_cluster(m, ord, alpha, &all)?;
    let mut leaf_of = vec![0; n];
    for (p, id) in sub.leaves {
        leaf_of[p] = id;
    }
    let tree = UltrametricTree::new(sub.nodes, leaf_of)?;
    Ok((tree, sub.trace))
}

pub fn build_ultrametric(
    m: &MetricSpace,
    ord: &PriorityOrdering,
    alpha: &PriorityFunction,
) -> Result<UltrametricTree, UltrametricError> {
    build_ultrametric_traced(m, ord, alpha).map(|(t, _)| t)
}
