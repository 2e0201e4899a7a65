//! Finite metric spaces as exact distance matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("distance matrix is not square (row {row} has {len} entries, expected {n})")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("asymmetric distances at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("nonzero diagonal entry at point {0}")]
    NonzeroDiagonal(usize),
    #[error("non-positive distance between distinct points {0} and {1}")]
    NonpositiveOffDiagonal(usize, usize),
    #[error("triangle inequality violated: d({0},{2}) > d({0},{1}) + d({1},{2})")]
    TriangleViolation(usize, usize, usize),
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// A finite metric space over points `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSpace {
    n: usize,
    dist: Vec<Scalar>,
}

impl MetricSpace {
    /// Wraps a row-major matrix that is already known to be a metric.
    pub(crate) fn from_trusted(n: usize, dist: Vec<Scalar>) -> MetricSpace {
        debug_assert_eq!(dist.len(), n * n);
        MetricSpace { n, dist }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> &Scalar {
        &self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Largest pairwise distance, or zero for fewer than two points.
    pub fn diameter(&self) -> Scalar {
        self.dist.iter().max().cloned().unwrap_or_default()
    }

    /// The sub-metric induced on `points`, reindexed in the given order.
    pub fn restrict(&self, points: &[usize]) -> MetricSpace {
        let m = points.len();
        let mut dist = Vec::with_capacity(m * m);
        for &a in points {
            for &b in points {
                dist.push(self.d(a, b).clone());
            }
        }
        MetricSpace { n: m, dist }
    }

    /// For every point, all points sorted by distance (ties by id). The
    /// point itself comes first.
    pub fn sorted_neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                let mut order: Vec<usize> = (0..self.n).collect();
                order.sort_by(|&a, &b| self.d(i, a).cmp(self.d(i, b)).then(a.cmp(&b)));
                order
            })
            .collect()
    }
}

/// Checks every metric axiom and returns the validated space.
pub fn validate_metric(matrix: Vec<Vec<Scalar>>) -> Result<MetricSpace, MetricError> {
    let n = matrix.len();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(MetricError::NotSquare { row, len: r.len(), n });
        }
    }
    for i in 0..n {
        if !matrix[i][i].is_zero() {
            return Err(MetricError::NonzeroDiagonal(i));
        }
        for j in (i + 1)..n {
            if matrix[i][j] != matrix[j][i] {
                return Err(MetricError::Asymmetric(i, j));
            }
            if !matrix[i][j].is_positive() {
                return Err(MetricError::NonpositiveOffDiagonal(i, j));
            }
        }
    }
    let dist: Vec<Scalar> = matrix.into_iter().flatten().collect();
    let space = MetricSpace { n, dist };
    check_triangle(&space)?;
    Ok(space)
}

fn check_triangle(m: &MetricSpace) -> Result<(), MetricError> {
    let n = m.n;
    if let Some(ints) = integer_matrix(m) {
        for i in 0..n {
            for j in 0..n {
                let dij = ints[i * n + j];
                for k in 0..n {
                    if ints[i * n + k] > dij + ints[j * n + k] {
                        return Err(MetricError::TriangleViolation(i, j, k));
                    }
                }
            }
        }
        return Ok(());
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if *m.d(i, k) > m.d(i, j) + m.d(j, k) {
                    return Err(MetricError::TriangleViolation(i, j, k));
                }
            }
        }
    }
    Ok(())
}

/// The matrix as `i64` when every entry is an integer below `2^61`.
fn integer_matrix(m: &MetricSpace) -> Option<Vec<i64>> {
    m.dist
        .iter()
        .map(|v| match v.as_small() {
            Some((num, 1)) if num.abs() < (1 << 61) => Some(num),
            _ => None,
        })
        .collect()
}

/// `max_i |u_i - v_i|`; zero for empty vectors.
pub fn linf_distance(u: &[Scalar], v: &[Scalar]) -> Result<Scalar, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::LengthMismatch(u.len(), v.len()));
    }
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .max()
        .unwrap_or_default())
}

/// JSON shape `{"n": .., "dist": [[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricJson {
    pub n: usize,
    pub dist: Vec<Vec<Scalar>>,
}

impl From<&MetricSpace> for MetricJson {
    fn from(m: &MetricSpace) -> Self {
        MetricJson { n: m.n, dist: m.rows() }
    }
}

impl TryFrom<MetricJson> for MetricSpace {
    type Error = MetricError;

    fn try_from(j: MetricJson) -> Result<Self, Self::Error> {
        if j.dist.len() != j.n {
            return Err(MetricError::NotSquare { row: j.dist.len(), len: j.dist.len(), n: j.n });
        }
        validate_metric(j.dist)
    }
}

impl Serialize for MetricSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MetricJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        MetricJson::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}
