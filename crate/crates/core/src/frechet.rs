//! Randomized Fréchet embeddings into `l_inf`, prioritized by distortion or
//! by dimension.
//!
//! High-priority points are replicated into several copies before the
//! coordinate sets are sampled, so dense sets hit them (value 0) with high
//! probability. Copies only affect sampling; every coordinate is evaluated on
//! the base points.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Embedding;
use crate::metric::MetricSpace;
use crate::priority::{PriorityError, PriorityOrdering};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FrechetError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("c must be at least 1")]
    ZeroC,
    #[error(transparent)]
    Ordering(#[from] PriorityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub k: u32,
    pub c: u32,
    pub seed: u64,
}

impl SampleConfig {
    pub fn new(k: u32, seed: u64) -> SampleConfig {
        SampleConfig { k, c: 16, seed }
    }

    fn check(&self) -> Result<(), FrechetError> {
        if self.k == 0 {
            return Err(FrechetError::ZeroK);
        }
        if self.c == 0 {
            return Err(FrechetError::ZeroC);
        }
        Ok(())
    }

    /// Whether `k` exceeds `log2 n`, where larger values buy nothing.
    pub fn k_exceeds_log_n(&self, n: usize) -> bool {
        n >= 1 && (self.k as f64) > (n as f64).log2()
    }
}

/// Copy counts per priority index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopiedSpace {
    /// `multiplicity[j - 1]` copies of the point with priority `j`.
    pub multiplicity: Vec<u64>,
    /// Level of each priority index (`None` for points outside every level).
    pub level: Vec<Option<u32>>,
    pub total: u64,
}

impl CopiedSpace {
    fn from_parts(multiplicity: Vec<u64>, level: Vec<Option<u32>>) -> CopiedSpace {
        let total = multiplicity.iter().sum();
        CopiedSpace { multiplicity, level, total }
    }
}

/// Smallest `i >= 1` with `j^k <= n^i`: the level of priority `j` in the
/// distortion construction.
pub fn distortion_level(j: usize, n: usize, k: u32) -> u32 {
    let jk = BigUint::from(j).pow(k);
    let nb = BigUint::from(n);
    let mut i = 1;
    let mut ni = nb.clone();
    while ni < jk {
        i += 1;
        ni *= &nb;
    }
    i
}

/// `ceil(x^(1/k))` for a big integer `x`.
fn ceil_root(x: &BigUint, k: u32) -> BigUint {
    let r = x.nth_root(k);
    if &r.pow(k) < x {
        r + 1u32
    } else {
        r
    }
}

/// Point `x_j` in level `i` gets `ceil((2^k n)^((k-i)/k))` copies.
pub fn build_copied_space_distortion(n: usize, k: u32) -> CopiedSpace {
    let base = (BigUint::one() << k as usize) * BigUint::from(n);
    let mut multiplicity = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    let mut cache: Vec<Option<u64>> = vec![None; k as usize + 1];
    for j in 1..=n {
        let i = distortion_level(j, n, k).min(k);
        let m = *cache[i as usize].get_or_insert_with(|| {
            ceil_root(&base.pow(k - i), k).to_u64().expect("copy count fits in u64")
        });
        multiplicity.push(m);
        level.push(Some(i));
    }
    CopiedSpace::from_parts(multiplicity, level)
}

/// Smallest `L >= 0` with `2^(2^L) >= n`; zero for `n <= 2`.
pub fn loglog_levels(n: usize) -> u32 {
    let mut l = 0;
    while n > 2 && pow2_pow2(l).is_some_and(|v| v < n) {
        l += 1;
    }
    l
}

fn pow2_pow2(i: u32) -> Option<usize> {
    1usize.checked_shl(1u32.checked_shl(i)?)
}

/// Level of priority `j >= 3` in the dimension construction:
/// `2^(2^i) < j <= 2^(2^(i+1))`.
pub fn dimension_level(j: usize) -> Option<u32> {
    if j <= 2 {
        return None;
    }
    let mut i = 0;
    while pow2_pow2(i + 1).is_some_and(|v| v < j) {
        i += 1;
    }
    Some(i)
}

/// `C(i) = n (L+1)^2 / (2^(2^(i+1)) (i+2)^2)` copies for level `i`, rounded
/// up and at least one; `x_1`, `x_2` get one copy each.
pub fn build_copied_space_dimension(n: usize) -> CopiedSpace {
    let l = loglog_levels(n) as u64;
    let mut multiplicity = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    for j in 1..=n {
        let lv = dimension_level(j);
        let m = match lv {
            None => 1,
            Some(i) => {
                let numer = BigUint::from(n) * BigUint::from((l + 1) * (l + 1));
                let denom = (BigUint::one() << (1usize << (i + 1))) * BigUint::from((i as u64 + 2) * (i as u64 + 2));
                let c = (&numer + &denom - 1u32) / &denom;
                c.to_u64().unwrap_or(u64::MAX).max(1)
            }
        };
        multiplicity.push(m);
        level.push(lv);
    }
    CopiedSpace::from_parts(multiplicity, level)
}

/// One sampled coordinate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateInfo {
    pub mode: String,
    pub label: String,
    pub probability: f64,
    pub set_size: usize,
}

#[derive(Debug, Clone)]
pub struct FrechetEmbedding {
    pub embedding: Embedding,
    pub coordinates: Vec<CoordinateInfo>,
    pub copies: CopiedSpace,
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// The membership stream of set `index` in family `label`.
pub fn set_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(fnv1a(label))));
    r.set_stream(index);
    r
}

/// Indices in `0..total` kept independently with probability `p`, drawn by
/// geometric skipping.
fn bernoulli_indices(r: &mut ChaCha8Rng, total: u64, p: f64) -> Vec<u64> {
    if p >= 1.0 {
        return (0..total).collect();
    }
    if p <= 0.0 {
        return Vec::new();
    }
    let log_q = (-p).ln_1p();
    let mut out = Vec::new();
    let mut pos: u64 = 0;
    loop {
        let u: f64 = 1.0 - r.gen::<f64>(); // in (0, 1]
        let skip = (u.ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - pos) as f64 {
            break;
        }
        pos += skip as u64;
        out.push(pos);
        pos += 1;
        if pos >= total {
            break;
        }
    }
    out
}

struct SetSpec {
    label: String,
    probability: f64,
    index: u64,
}

/// Number of sampled copies, and the base points they belong to
/// (deduplicated, ascending).
fn sample_base_points(r: &mut ChaCha8Rng, copies: &CopiedSpace, prefix: &[u64], ord: &PriorityOrdering, p: f64) -> (usize, Vec<usize>) {
    let sampled = bernoulli_indices(r, copies.total, p);
    let size = sampled.len();
    let mut points: Vec<usize> = sampled
        .into_iter()
        .map(|e| {
            let j = prefix.partition_point(|&s| s <= e);
            ord.point(j + 1)
        })
        .collect();
    points.sort_unstable();
    points.dedup();
    (size, points)
}

/// `d(x, S)` for every point, or all zeros when `S` is empty.
fn set_distances(m: &MetricSpace, neighbors: Option<&[Vec<usize>]>, members: &[usize]) -> Vec<Scalar> {
    let n = m.len();
    if members.is_empty() {
        return vec![Scalar::ZERO; n];
    }
    let mut is_member = vec![false; n];
    members.iter().for_each(|&p| is_member[p] = true);
    (0..n)
        .map(|x| {
            if is_member[x] {
                return Scalar::ZERO;
            }
            match neighbors {
                Some(nb) if members.len() * members.len() > n => {
                    let first = nb[x].iter().find(|&&y| is_member[y]).expect("set is nonempty");
                    m.d(x, *first).clone()
                }
                _ => members.iter().map(|&y| m.d(x, y)).min().expect("set is nonempty").clone(),
            }
        })
        .collect()
}

fn realize(
    m: &MetricSpace,
    ord: &PriorityOrdering,
    copies: &CopiedSpace,
    seed: u64,
    mode: &str,
    fixed: Vec<(String, Vec<Scalar>)>,
    specs: Vec<SetSpec>,
) -> FrechetEmbedding {
    let n = m.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &c in &copies.multiplicity {
        prefix.push(prefix.last().unwrap() + c);
    }
    let prefix = &prefix[1..]; // prefix[j-1] = copies of x_1..x_j
    let neighbors = m.sorted_neighbors();
    let sampled: Vec<(CoordinateInfo, Vec<Scalar>)> = specs
        .into_par_iter()
        .map(|spec| {
            let mut r = set_rng(seed, &spec.label, spec.index);
            let (set_size, members) = sample_base_points(&mut r, copies, prefix, ord, spec.probability);
            let column = set_distances(m, Some(&neighbors), &members);
            let info = CoordinateInfo {
                mode: mode.to_string(),
                label: spec.label,
                probability: spec.probability,
                set_size,
            };
            (info, column)
        })
        .collect();
    let mut coordinates = Vec::with_capacity(fixed.len() + sampled.len());
    let mut rows: Vec<Vec<Scalar>> = vec![Vec::with_capacity(fixed.len() + sampled.len()); n];
    let fixed = fixed.into_iter().map(|(label, col)| {
        (CoordinateInfo { mode: mode.to_string(), label, probability: 1.0, set_size: 1 }, col)
    });
    for (info, column) in fixed.chain(sampled) {
        coordinates.push(info);
        for (row, v) in rows.iter_mut().zip(column) {
            row.push(v);
        }
    }
    let dim = coordinates.len();
    let embedding = Embedding::new(dim, rows).expect("every column covers every point");
    FrechetEmbedding { embedding, coordinates, copies: copies.clone() }
}

/// Sets per density in the distortion construction:
/// `ceil(c * N^(1/k) * ln N)`.
pub fn distortion_sets_per_density(total: u64, k: u32, c: u32) -> usize {
    let nf = total as f64;
    (c as f64 * nf.powf(1.0 / k as f64) * nf.ln()).ceil().max(0.0) as usize
}

/// Distortion-prioritized embedding: for each density `i = 1..=k`, sets that
/// keep each copy with probability `N^(-i/k)`.
pub fn embed_linf_distortion(m: &MetricSpace, ord: &PriorityOrdering, cfg: &SampleConfig) -> Result<FrechetEmbedding, FrechetError> {
    cfg.check()?;
    ord.expect_len(m.len())?;
    let copies = build_copied_space_distortion(m.len(), cfg.k);
    let per = distortion_sets_per_density(copies.total, cfg.k, cfg.c);
    let nf = copies.total as f64;
    let mut specs = Vec::with_capacity(per * cfg.k as usize);
    for i in 1..=cfg.k {
        let p = nf.powf(-(i as f64) / cfg.k as f64);
        for h in 0..per {
            specs.push(SetSpec { label: format!("density-{i}"), probability: p, index: h as u64 });
        }
    }
    Ok(realize(m, ord, &copies, cfg.seed, "distortion", Vec::new(), specs))
}

/// `R(i) = ceil(c * 2^((2^i + 2)/k) * ln n)`.
pub fn dimension_sets_per_level(i: u32, n: usize, k: u32, c: u32) -> usize {
    let e = ((1u64 << i) as f64 + 2.0) / k as f64;
    (c as f64 * e.exp2() * (n as f64).ln()).ceil().max(0.0) as usize
}

/// Per-copy probability of the sets of level `i` and step `s`.
pub fn dimension_probability(i: u32, s: u32, k: u32, total: u64) -> f64 {
    let (sf, kf) = (s as f64, k as f64);
    let e = (1u64 << i) as f64 * (1.0 + sf / kf) - 2.0 + 2.0 * sf / kf;
    let ip2 = i as f64 + 2.0;
    (e.exp2() * ip2 * ip2 / total as f64).min(1.0)
}

/// Dimension-prioritized embedding. Layout: the anchors `d(x, x_1)` and
/// `d(x, x_2)`; `ceil(c ln n)` sets at probability `1/N`; then for each level
/// `i` ascending and `s = 1..=k`, `R(i)` sets.
pub fn embed_linf_dimension(m: &MetricSpace, ord: &PriorityOrdering, cfg: &SampleConfig) -> Result<FrechetEmbedding, FrechetError> {
    cfg.check()?;
    let n = m.len();
    ord.expect_len(n)?;
    let copies = build_copied_space_dimension(n);
    let mut fixed = Vec::new();
    for j in 1..=n.min(2) {
        let x = ord.point(j);
        fixed.push((format!("anchor-{j}"), (0..n).map(|y| m.d(y, x).clone()).collect()));
    }
    let nf = copies.total as f64;
    let mut specs = Vec::new();
    let eg = (cfg.c as f64 * (n as f64).ln()).ceil().max(0.0) as usize;
    for g in 0..eg {
        specs.push(SetSpec { label: "sparse".into(), probability: 1.0 / nf, index: g as u64 });
    }
    for i in 0..loglog_levels(n) {
        let r = dimension_sets_per_level(i, n, cfg.k, cfg.c);
        for s in 1..=cfg.k {
            let p = dimension_probability(i, s, cfg.k, copies.total);
            for h in 0..r {
                specs.push(SetSpec { label: format!("level-{i}-step-{s}"), probability: p, index: h as u64 });
            }
        }
    }
    Ok(realize(m, ord, &copies, cfg.seed, "dimension", fixed, specs))
}

/// Allowed distortion for priority `j` in the distortion construction:
/// `2 * level(j) - 1`.
pub fn distortion_mode_bound(j: usize, n: usize, k: u32) -> u64 {
    2 * distortion_level(j, n, k).min(k) as u64 - 1
}

/// Allowed distortion for priority `j` in the dimension construction:
/// `1` for `j <= 2`, else `2k * ceil(log2 log2 j) + 1`.
pub fn dimension_mode_bound(j: usize, k: u32) -> u64 {
    if j <= 2 {
        return 1;
    }
    // ceil(log2 log2 j) = smallest t with 2^(2^t) >= j
    let mut t = 0u64;
    while pow2_pow2(t as u32).is_some_and(|v| v < j) {
        t += 1;
    }
    2 * k as u64 * t + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::expanding_coordinate;
    use crate::generate::{random_metric, random_ordering, GraphShape};

    #[test]
    fn k1_gives_single_copies() {
        let c = build_copied_space_distortion(9, 1);
        assert!(c.multiplicity.iter().all(|&m| m == 1));
        assert_eq!(c.total, 9);
    }

    #[test]
    fn n4_k2_copies() {
        let c = build_copied_space_distortion(4, 2);
        assert_eq!(c.multiplicity, vec![4, 4, 1, 1]);
        assert_eq!(c.total, 10);
    }

    #[test]
    fn copy_counts_are_monotone_and_bounded() {
        for n in [1usize, 2, 3, 17, 100, 256] {
            for k in 1..=5u32 {
                let c = build_copied_space_distortion(n, k);
                assert!(c.multiplicity.windows(2).all(|w| w[0] >= w[1]));
                assert!(c.total <= (1u64 << k) * n as u64 + n as u64);
            }
            let c = build_copied_space_dimension(n);
            assert!(c.multiplicity.windows(2).skip(2).all(|w| w[0] >= w[1]));
            let l = loglog_levels(n) as u64;
            assert!(c.total <= n as u64 * (l + 1) * (l + 1) + n as u64);
        }
    }

    #[test]
    fn n16_dimension_copies() {
        let c = build_copied_space_dimension(16);
        assert_eq!(&c.multiplicity[..4], &[1, 1, 9, 9]);
        assert!(c.multiplicity[4..].iter().all(|&m| m == 1));
        assert_eq!(c.level[0], None);
        assert_eq!(c.level[1], None);
    }

    #[test]
    fn levels() {
        assert_eq!(loglog_levels(2), 0);
        assert_eq!(loglog_levels(3), 1);
        assert_eq!(loglog_levels(16), 2);
        assert_eq!(loglog_levels(17), 3);
        assert_eq!(dimension_level(3), Some(0));
        assert_eq!(dimension_level(5), Some(1));
        assert_eq!(dimension_level(16), Some(1));
        assert_eq!(dimension_level(17), Some(2));
        assert_eq!(distortion_level(1, 256, 2), 1);
        assert_eq!(distortion_level(16, 256, 2), 1);
        assert_eq!(distortion_level(17, 256, 2), 2);
        assert_eq!(dimension_mode_bound(3, 2), 5);
        assert_eq!(dimension_mode_bound(16, 2), 9);
        assert_eq!(dimension_mode_bound(17, 2), 13);
    }

    #[test]
    fn geometric_skipping_matches_rate() {
        let mut r = set_rng(1, "t", 0);
        let hits: usize = (0..200).map(|_| bernoulli_indices(&mut r, 1000, 0.05).len()).sum();
        let rate = hits as f64 / 200_000.0;
        assert!((rate - 0.05).abs() < 0.005, "{rate}");
        assert_eq!(bernoulli_indices(&mut r, 5, 1.0), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_points_distortion_one() {
        let m = random_metric(2, &GraphShape::default(), 3).unwrap();
        let ord = PriorityOrdering::identity(2);
        let f = embed_linf_distortion(&m, &ord, &SampleConfig::new(1, 5)).unwrap();
        assert_eq!(f.embedding.dim(), distortion_sets_per_density(2, 1, 16));
        assert_eq!(f.embedding.distance(0, 1), *m.d(0, 1));
    }

    #[test]
    fn deterministic_and_non_expansive() {
        let m = random_metric(30, &GraphShape::default(), 8).unwrap();
        let ord = random_ordering(30, 2);
        let cfg = SampleConfig::new(2, 99);
        let a = embed_linf_distortion(&m, &ord, &cfg).unwrap();
        let b = embed_linf_distortion(&m, &ord, &cfg).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(expanding_coordinate(&m, &a.embedding), None);
        let d = embed_linf_dimension(&m, &ord, &cfg).unwrap();
        assert_eq!(d.embedding, embed_linf_dimension(&m, &ord, &cfg).unwrap().embedding);
        assert_eq!(expanding_coordinate(&m, &d.embedding), None);
        assert!(d.embedding.vector(ord.point(1))[0].is_zero());
        assert!(d.embedding.vector(ord.point(2))[1].is_zero());
    }
}
