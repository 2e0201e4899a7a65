//! Exhaustive prioritized distortion and dimension audits.
//!
//! Every audit is exact. Embeddings whose coordinates and distances share a
//! small common denominator are rescaled to `i64` first, which keeps the
//! `O(n^2 * dim)` pair scan cheap without giving up exactness.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::metric::MetricSpace;
use crate::priority::PriorityOrdering;
use crate::scalar::Scalar;

/// A non-negative value that may be infinite.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extended {
    Finite(Scalar),
    Infinite,
}

impl Extended {
    pub fn finite(&self) -> Option<&Scalar> {
        match self {
            Extended::Finite(s) => Some(s),
            Extended::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::Finite(s) => s.to_f64(),
            Extended::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(s) => write!(f, "{s}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl fmt::Debug for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Extended {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        if raw == "inf" {
            Ok(Extended::Infinite)
        } else {
            raw.parse().map(Extended::Finite).map_err(serde::de::Error::custom)
        }
    }
}

/// Worst ratios over all pairs containing the point of priority `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub j: usize,
    pub point: usize,
    /// `max target/source`.
    pub expansion: Scalar,
    pub expansion_witness: usize,
    /// `max source/target`; infinite when some partner collapses onto it.
    pub contraction: Extended,
    pub contraction_witness: usize,
    /// `max over pairs of max(expansion, contraction)`.
    pub distortion: Extended,
    pub distortion_witness: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub per_j: Vec<PairStats>,
}

impl DistortionReport {
    pub fn worst_distortion(&self) -> Extended {
        self.per_j
            .iter()
            .map(|s| s.distortion.clone())
            .max()
            .unwrap_or(Extended::Finite(Scalar::ONE))
    }

    pub fn worst_expansion(&self) -> Scalar {
        self.per_j.iter().map(|s| s.expansion.clone()).max().unwrap_or_default()
    }

    pub fn worst_contraction(&self) -> Extended {
        self.per_j
            .iter()
            .map(|s| s.contraction.clone())
            .max()
            .unwrap_or(Extended::Finite(Scalar::ZERO))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dim: usize,
    /// `per_j[j-1]`: one past the index of the last nonzero coordinate of
    /// the point with priority `j`.
    pub per_j: Vec<usize>,
}

#[derive(Clone)]
struct Acc {
    expansion: Scalar,
    expansion_witness: usize,
    contraction: Extended,
    contraction_witness: usize,
    distortion: Extended,
    distortion_witness: usize,
}

impl Acc {
    fn empty() -> Acc {
        Acc {
            expansion: Scalar::ZERO,
            expansion_witness: usize::MAX,
            contraction: Extended::Finite(Scalar::ZERO),
            contraction_witness: usize::MAX,
            distortion: Extended::Finite(Scalar::ZERO),
            distortion_witness: usize::MAX,
        }
    }

    fn offer(&mut self, partner: usize, exp: &Scalar, con: &Extended) {
        fn better<T: Ord>(new: &T, who: usize, old: &T, old_who: usize) -> bool {
            new > old || (new == old && who < old_who)
        }
        if better(exp, partner, &self.expansion, self.expansion_witness) {
            self.expansion = exp.clone();
            self.expansion_witness = partner;
        }
        if better(con, partner, &self.contraction, self.contraction_witness) {
            self.contraction = con.clone();
            self.contraction_witness = partner;
        }
        let dist = std::cmp::max(Extended::Finite(exp.clone()), con.clone());
        if better(&dist, partner, &self.distortion, self.distortion_witness) {
            self.distortion = dist;
            self.distortion_witness = partner;
        }
    }

    fn merge(&mut self, other: &Acc) {
        if other.expansion_witness != usize::MAX {
            self.offer(other.expansion_witness, &other.expansion, &Extended::Finite(Scalar::ZERO));
        }
        let (c, cw) = (other.contraction.clone(), other.contraction_witness);
        if cw != usize::MAX && (c > self.contraction || (c == self.contraction && cw < self.contraction_witness)) {
            self.contraction = c;
            self.contraction_witness = cw;
        }
        let (d, dw) = (other.distortion.clone(), other.distortion_witness);
        if dw != usize::MAX && (d > self.distortion || (d == self.distortion && dw < self.distortion_witness)) {
            self.distortion = d;
            self.distortion_witness = dw;
        }
    }
}

fn ratios(source: &Scalar, target: &Scalar) -> (Scalar, Extended) {
    let exp = target / source;
    let con = if target.is_zero() { Extended::Infinite } else { Extended::Finite(source / target) };
    (exp, con)
}

/// Prioritized distortion of an arbitrary target distance against `m`.
/// `target(a, b)` is queried for `a < b` only.
pub fn distortion_report_with<F>(
    m: &MetricSpace,
    ord: &PriorityOrdering,
    target: F,
    parallel: bool,
) -> DistortionReport
where
    F: Fn(usize, usize) -> Scalar + Sync,
{
    scan_pairs(m.len(), ord, |a, b| (m.d(a, b).clone(), target(a, b)), parallel)
}

fn scan_pairs<F>(n: usize, ord: &PriorityOrdering, pair: F, parallel: bool) -> DistortionReport
where
    F: Fn(usize, usize) -> (Scalar, Scalar) + Sync,
{
    let row = |a: usize, accs: &mut Vec<Acc>| {
        for b in (a + 1)..n {
            let (src, tgt) = pair(a, b);
            let (exp, con) = ratios(&src, &tgt);
            accs[a].offer(b, &exp, &con);
            accs[b].offer(a, &exp, &con);
        }
    };
    let accs = if parallel {
        (0..n)
            .into_par_iter()
            .fold(
                || vec![Acc::empty(); n],
                |mut accs, a| {
                    row(a, &mut accs);
                    accs
                },
            )
            .reduce(
                || vec![Acc::empty(); n],
                |mut x, y| {
                    for (l, r) in x.iter_mut().zip(&y) {
                        l.merge(r);
                    }
                    x
                },
            )
    } else {
        let mut accs = vec![Acc::empty(); n];
        for a in 0..n {
            row(a, &mut accs);
        }
        accs
    };
    if n < 2 {
        return DistortionReport { per_j: Vec::new() };
    }
    let per_j = (1..=n)
        .map(|j| {
            let p = ord.point(j);
            let acc = &accs[p];
            PairStats {
                j,
                point: p,
                expansion: acc.expansion.clone(),
                expansion_witness: acc.expansion_witness,
                contraction: acc.contraction.clone(),
                contraction_witness: acc.contraction_witness,
                distortion: acc.distortion.clone(),
                distortion_witness: acc.distortion_witness,
            }
        })
        .collect();
    DistortionReport { per_j }
}

/// Common-denominator integer image of a list of scalars, if every scaled
/// value fits comfortably in `i64`.
fn common_scale<'a>(values: impl Iterator<Item = &'a Scalar> + Clone) -> Option<BigInt> {
    let mut lcm = BigInt::one();
    for v in values.clone() {
        let d = v.denom();
        if d != BigInt::one() {
            lcm = lcm.lcm(&d);
        }
    }
    let limit = BigInt::from(1i64 << 61);
    for v in values {
        let scaled = v.numer() * (&lcm / v.denom());
        if scaled > limit || scaled < -limit.clone() {
            return None;
        }
    }
    Some(lcm)
}

fn scaled(v: &Scalar, lcm: &BigInt) -> i64 {
    (v.numer() * (lcm / v.denom())).to_i64().expect("checked by common_scale")
}

/// Prioritized distortion of `f` (one vector per point of `m`) in `l_inf`.
pub fn distortion_report(
    m: &MetricSpace,
    f: &Embedding,
    ord: &PriorityOrdering,
    parallel: bool,
) -> DistortionReport {
    assert_eq!(f.len(), m.len(), "embedding must cover every point");
    let n = m.len();
    let all = (0..n)
        .flat_map(|a| m.row(a).iter())
        .chain(f.vectors().iter().flatten());
    match common_scale(all) {
        Some(lcm) => {
            let dist: Vec<i64> = (0..n).flat_map(|a| m.row(a).iter()).map(|v| scaled(v, &lcm)).collect();
            let dim = f.dim();
            let coords: Vec<i64> = f.vectors().iter().flatten().map(|v| scaled(v, &lcm)).collect();
            let linf = |a: usize, b: usize| -> i64 {
                let (x, y) = (&coords[a * dim..(a + 1) * dim], &coords[b * dim..(b + 1) * dim]);
                x.iter().zip(y).map(|(p, q)| (p - q).abs()).max().unwrap_or(0)
            };
            scan_pairs(
                n,
                ord,
                |a, b| (Scalar::from_int(dist[a * n + b]), Scalar::from_int(linf(a, b))),
                parallel,
            )
        }
        None => distortion_report_with(m, ord, |a, b| f.distance(a, b), parallel),
    }
}

/// Prioritized dimension of `f`.
pub fn dimension_report(f: &Embedding, ord: &PriorityOrdering) -> DimensionReport {
    let per_j = (1..=ord.len())
        .map(|j| {
            f.vector(ord.point(j))
                .iter()
                .rposition(|v| !v.is_zero())
                .map_or(0, |i| i + 1)
        })
        .collect();
    DimensionReport { dim: f.dim(), per_j }
}

/// Largest `|f_c(a) - f_c(b)| - d(a, b)` over coordinates and pairs, as a
/// witness `(a, b, coordinate)` if some single coordinate expands.
pub fn expanding_coordinate(m: &MetricSpace, f: &Embedding) -> Option<(usize, usize, usize)> {
    for a in 0..m.len() {
        for b in (a + 1)..m.len() {
            let d = m.d(a, b);
            for c in 0..f.dim() {
                if (&f.vector(a)[c] - &f.vector(b)[c]).abs() > *d {
                    return Some((a, b, c));
                }
            }
        }
    }
    None
}
