use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::linf_distance;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("vector {index} has length {len}, expected dim = {dim}")]
    RaggedVector { index: usize, len: usize, dim: usize },
}

/// Points mapped into `l_inf^dim`, one vector per point in a fixed
/// coordinate order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EmbeddingJson", into = "EmbeddingJson")]
pub struct Embedding {
    dim: usize,
    vectors: Vec<Vec<Scalar>>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingJson {
    dim: usize,
    vectors: Vec<Vec<Scalar>>,
}

impl TryFrom<EmbeddingJson> for Embedding {
    type Error = EmbeddingError;
    fn try_from(j: EmbeddingJson) -> Result<Self, Self::Error> {
        Embedding::new(j.dim, j.vectors)
    }
}

impl From<Embedding> for EmbeddingJson {
    fn from(e: Embedding) -> Self {
        EmbeddingJson { dim: e.dim, vectors: e.vectors }
    }
}

impl Embedding {
    pub fn new(dim: usize, vectors: Vec<Vec<Scalar>>) -> Result<Embedding, EmbeddingError> {
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(EmbeddingError::RaggedVector { index, len: v.len(), dim });
            }
        }
        Ok(Embedding { dim, vectors })
    }

    pub fn zeros(points: usize, dim: usize) -> Embedding {
        Embedding { dim, vectors: vec![vec![Scalar::ZERO; dim]; points] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, point: usize) -> &[Scalar] {
        &self.vectors[point]
    }

    pub fn vectors(&self) -> &[Vec<Scalar>] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Vec<Scalar>> {
        self.vectors
    }

    pub fn distance(&self, a: usize, b: usize) -> Scalar {
        linf_distance(&self.vectors[a], &self.vectors[b])
            .expect("vectors of one embedding share a length")
    }

    /// Keeps only the listed points, in order.
    pub fn select(&self, points: &[usize]) -> Embedding {
        Embedding { dim: self.dim, vectors: points.iter().map(|&p| self.vectors[p].clone()).collect() }
    }

    /// Concatenates coordinate blocks point-wise: `self ⊕ other`.
    pub fn concat(mut self, other: &Embedding) -> Embedding {
        assert_eq!(self.len(), other.len(), "concatenated embeddings cover different points");
        for (v, w) in self.vectors.iter_mut().zip(&other.vectors) {
            v.extend_from_slice(w);
        }
        self.dim += other.dim;
        self
    }
}
