//! Priority orderings and certified priority functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PriorityError {
    #[error("ordering is not a permutation of 0..{n} (offending entry {entry})")]
    NotPermutation { n: usize, entry: usize },
    #[error("ordering ranks {got} points but the input has {expected}")]
    OrderingMismatch { expected: usize, got: usize },
    #[error("priority function must be evaluated for at least one index")]
    EmptyRange,
    #[error("priority function is not positive at j = {0}")]
    NotPositive(usize),
    #[error("priority function decreases between j = {0} and j = {1}")]
    NotMonotone(usize, usize),
    #[error("sum of 1/alpha(j) over the first {n} indices is {sum} >= 1")]
    SumAtLeastOne { n: usize, sum: Scalar },
}

/// A ranking of points: `perm[j - 1]` is the point of priority `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OrderingJson", into = "OrderingJson")]
pub struct PriorityOrdering {
    perm: Vec<usize>,
    rank: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OrderingJson {
    perm: Vec<usize>,
}

impl TryFrom<OrderingJson> for PriorityOrdering {
    type Error = PriorityError;
    fn try_from(j: OrderingJson) -> Result<Self, Self::Error> {
        PriorityOrdering::new(j.perm)
    }
}

impl From<PriorityOrdering> for OrderingJson {
    fn from(o: PriorityOrdering) -> Self {
        OrderingJson { perm: o.perm }
    }
}

impl PriorityOrdering {
    pub fn new(perm: Vec<usize>) -> Result<PriorityOrdering, PriorityError> {
        let n = perm.len();
        let mut rank = vec![usize::MAX; n];
        for (pos, &p) in perm.iter().enumerate() {
            if p >= n || rank[p] != usize::MAX {
                return Err(PriorityError::NotPermutation { n, entry: p });
            }
            rank[p] = pos + 1;
        }
        Ok(PriorityOrdering { perm, rank })
    }

    pub fn identity(n: usize) -> PriorityOrdering {
        PriorityOrdering::new((0..n).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// The point with priority `j` (1-based).
    pub fn point(&self, j: usize) -> usize {
        self.perm[j - 1]
    }

    /// 1-based priority of `point`.
    pub fn rank(&self, point: usize) -> usize {
        self.rank[point]
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn expect_len(&self, n: usize) -> Result<(), PriorityError> {
        if self.len() == n {
            Ok(())
        } else {
            Err(PriorityError::OrderingMismatch { expected: n, got: self.len() })
        }
    }

    /// The ordering induced on `points` (listed as ids of the parent space),
    /// expressed over local indices `0..points.len()`.
    pub fn induced(&self, points: &[usize]) -> PriorityOrdering {
        let mut local: Vec<usize> = (0..points.len()).collect();
        local.sort_by_key(|&i| self.rank(points[i]));
        PriorityOrdering::new(local).expect("induced ordering is a permutation")
    }
}

/// A priority function tabulated and certified on `1..=n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityFunction {
    values: Vec<Scalar>,
    partial_sum: Scalar,
    description: String,
}

impl PriorityFunction {
    /// `alpha(j)` for `1 <= j <= n_max`.
    pub fn alpha(&self, j: usize) -> &Scalar {
        assert!(j >= 1 && j <= self.values.len(), "alpha({j}) outside certified range");
        &self.values[j - 1]
    }

    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    pub fn partial_sum(&self) -> &Scalar {
        &self.partial_sum
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }
}

/// Tabulates `alpha` on `1..=n` and certifies positivity, monotonicity and
/// `sum 1/alpha(j) < 1`.
pub fn validate_priority_function(
    alpha: impl Fn(usize) -> Scalar,
    n: usize,
    description: impl Into<String>,
) -> Result<PriorityFunction, PriorityError> {
    if n == 0 {
        return Err(PriorityError::EmptyRange);
    }
    let values: Vec<Scalar> = (1..=n).map(alpha).collect();
    for (i, v) in values.iter().enumerate() {
        if !v.is_positive() {
            return Err(PriorityError::NotPositive(i + 1));
        }
        if i > 0 && values[i - 1] > *v {
            return Err(PriorityError::NotMonotone(i, i + 1));
        }
    }
    let sum: Scalar = values.iter().map(Scalar::recip).sum();
    if sum >= Scalar::ONE {
        return Err(PriorityError::SumAtLeastOne { n, sum });
    }
    Ok(PriorityFunction { values, partial_sum: sum, description: description.into() })
}

/// `j * log2(j+1) * (log2 log2 (j+3))^1.1`, the shape of the default
/// priority function before scaling.
fn default_shape(j: usize) -> f64 {
    let j = j as f64;
    j * (j + 1.0).log2() * (j + 3.0).log2().log2().powf(1.1)
}

/// `alpha(j) = ceil(c * shape(j))` where `c` is the smallest power of two
/// whose tabulated values certify on `1..=n`.
pub fn default_priority_function(n: usize) -> PriorityFunction {
    let n = n.max(1);
    let mut c: u64 = 1;
    loop {
        let eval = |j: usize| Scalar::from_f64_ceil(c as f64 * default_shape(j), 1);
        match validate_priority_function(eval, n, format!("default(c={c})")) {
            Ok(f) => return f,
            Err(PriorityError::SumAtLeastOne { .. }) => c *= 2,
            Err(e) => panic!("default priority function failed certification: {e}"),
        }
    }
}
