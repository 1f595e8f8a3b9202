//! Rankings, points of the permutohedron and the Spearman geometry that
//! connects them.
//!
//! A [`Ranking`] of `n` items is a bijection onto `{1..n}` stored as the rank
//! vector `r = (r_1, .., r_n)`, where `r_i` is the rank of item `i` and rank 1
//! is the most preferred. Every ranking lies on the sphere of squared radius
//! `n(n^2-1)/12` around the barycenter `((n+1)/2, .., (n+1)/2)`; the convex
//! hull of all rankings is the permutohedron, whose points are represented by
//! [`PermutohedronPoint`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MallowsError, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// `n(n+1)/2`, the coordinate sum shared by every point of the permutohedron.
pub fn rank_sum(n: usize) -> u64 {
    let n = n as u64;
    n * (n + 1) / 2
}

/// `n(n+1)(2n+1)/6`, the squared norm shared by every ranking.
pub fn rank_sq_norm(n: usize) -> u64 {
    let n = n as u64;
    n * (n + 1) * (2 * n + 1) / 6
}

/// Squared Spearman distance from any ranking to the barycenter, `n(n^2-1)/12`.
pub fn sphere_sq_radius(n: usize) -> f64 {
    let n = n as f64;
    n * (n * n - 1.0) / 12.0
}

/// Largest Spearman distance between two rankings, `n(n^2-1)/3`.
pub fn max_distance(n: usize) -> u64 {
    let n = n as u64;
    n * (n * n - 1) / 3
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// A full ranking of `n` items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Ranking(Vec<u32>);

impl Ranking {
    pub fn new(ranks: Vec<u32>) -> Result<Self> {
        let n = ranks.len();
        if n == 0 {
            return Err(MallowsError::InvalidRanking("empty ranking".into()));
        }
        let mut seen = vec![false; n];
        for (i, &r) in ranks.iter().enumerate() {
            if r == 0 || r as usize > n {
                return Err(MallowsError::InvalidRanking(format!(
                    "rank {r} of item {} is outside 1..={n}",
                    i + 1
                )));
            }
            if std::mem::replace(&mut seen[r as usize - 1], true) {
                return Err(MallowsError::InvalidRanking(format!("rank {r} appears more than once")));
            }
        }
        Ok(Self(ranks))
    }

    pub(crate) fn from_vec_unchecked(ranks: Vec<u32>) -> Self {
        debug_assert!(Self::new(ranks.clone()).is_ok());
        Self(ranks)
    }

    pub fn identity(n: usize) -> Self {
        Self((1..=n as u32).collect())
    }

    /// Builds a ranking from an ordering: `order[k]` is the (0-based) item
    /// placed at rank `k + 1`.
    pub fn from_ordering(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut ranks = vec![0u32; n];
        for (k, &item) in order.iter().enumerate() {
            if item >= n || ranks[item] != 0 {
                return Err(MallowsError::InvalidRanking(format!("invalid ordering {order:?}")));
            }
            ranks[item] = k as u32 + 1;
        }
        Ok(Self(ranks))
    }

    /// Items from most to least preferred (0-based).
    pub fn ordering(&self) -> Vec<usize> {
        let mut order = vec![0usize; self.len()];
        for (item, &r) in self.0.iter().enumerate() {
            order[r as usize - 1] = item;
        }
        order
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ranks(&self) -> &[u32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&r| r as f64).collect()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }

    /// `(self ∘ other)_i = self_{other_i}`.
    pub fn compose(&self, other: &Ranking) -> Result<Ranking> {
        check_len(self.len(), other.len())?;
        Ok(Ranking(other.0.iter().map(|&j| self.0[j as usize - 1]).collect()))
    }

    pub fn inverse(&self) -> Ranking {
        let mut inv = vec![0u32; self.len()];
        for (i, &r) in self.0.iter().enumerate() {
            inv[r as usize - 1] = i as u32 + 1;
        }
        Ranking(inv)
    }

    /// Integer inner product `self · other`.
    pub fn dot(&self, other: &Ranking) -> Result<u64> {
        check_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(&a, &b)| a as u64 * b as u64).sum())
    }

    pub fn dot_real(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Ranking {
    type Err = MallowsError;

    /// Accepts `2,1,4,3`, `(2,1,4,3)` or whitespace separated ranks.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let ranks = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| MallowsError::InvalidRanking(format!("cannot parse {t:?} as a rank")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ranking::new(ranks)
    }
}

impl TryFrom<Vec<u32>> for Ranking {
    type Error = MallowsError;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Ranking::new(v)
    }
}

impl From<Ranking> for Vec<u32> {
    fn from(r: Ranking) -> Self {
        r.0
    }
}

/// A real vector in the permutohedron of order `n`.
///
/// Only the coordinate-sum constraint and the box `1 <= x_i <= n` are
/// validated; every constructor used by this crate (means, convex
/// combinations, midranks, top-k completion) yields hull points anyway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PermutohedronPoint(Vec<f64>);

impl PermutohedronPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(MallowsError::InvalidPoint("empty point".into()));
        }
        let hi = n as f64;
        for (i, &x) in coords.iter().enumerate() {
            if !x.is_finite() || x < 1.0 - SUM_TOLERANCE || x > hi + SUM_TOLERANCE {
                return Err(MallowsError::InvalidPoint(format!(
                    "coordinate {} = {x} is outside [1, {n}]",
                    i + 1
                )));
            }
        }
        let sum: f64 = coords.iter().sum();
        let target = rank_sum(n) as f64;
        if (sum - target).abs() > SUM_TOLERANCE {
            return Err(MallowsError::InvalidPoint(format!(
                "coordinates sum to {sum}, expected {target}"
            )));
        }
        Ok(Self(coords))
    }

    pub fn barycenter(n: usize) -> Self {
        Self(vec![(n as f64 + 1.0) / 2.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn sq_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    /// Returns the ranking when every coordinate is an exact rank.
    pub fn as_ranking(&self) -> Option<Ranking> {
        let ranks = self
            .0
            .iter()
            .map(|&x| (x.fract() == 0.0).then_some(x as u32))
            .collect::<Option<Vec<_>>>()?;
        Ranking::new(ranks).ok()
    }
}

impl From<&Ranking> for PermutohedronPoint {
    fn from(r: &Ranking) -> Self {
        Self(r.to_f64())
    }
}

impl TryFrom<Vec<f64>> for PermutohedronPoint {
    type Error = MallowsError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PermutohedronPoint::new(v)
    }
}

impl From<PermutohedronPoint> for Vec<f64> {
    fn from(p: PermutohedronPoint) -> Self {
        p.0
    }
}

impl fmt::Display for PermutohedronPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Anything with real coordinates; lets distances mix rankings and points.
pub trait Coordinates {
    fn dim(&self) -> usize;
    fn coord(&self, i: usize) -> f64;
}

impl Coordinates for Ranking {
    fn dim(&self) -> usize {
        self.len()
    }
    fn coord(&self, i: usize) -> f64 {
        self.0[i] as f64
    }
}

impl Coordinates for PermutohedronPoint {
    fn dim(&self) -> usize {
        self.len()
    }
    fn coord(&self, i: usize) -> f64 {
        self.0[i]
    }
}

impl Coordinates for [f64] {
    fn dim(&self) -> usize {
        self.len()
    }
    fn coord(&self, i: usize) -> f64 {
        self[i]
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(MallowsError::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Exact Spearman distance `||a - b||^2` between two rankings.
pub fn spearman_distance(a: &Ranking, b: &Ranking) -> Result<u64> {
    check_len(a.len(), b.len())?;
    Ok(rank_distance(&a.0, &b.0))
}

/// Spearman distance between arbitrary points of the permutohedron.
pub fn spearman_distance_real<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: Coordinates + ?Sized,
    B: Coordinates + ?Sized,
{
    check_len(a.dim(), b.dim())?;
    Ok((0..a.dim()).map(|i| (a.coord(i) - b.coord(i)).powi(2)).sum())
}

#[inline]
pub(crate) fn rank_distance(a: &[u32], b: &[u32]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum()
}

#[inline]
pub(crate) fn point_distance(a: &[u32], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(&r, &y)| (r as f64 - y).powi(2)).sum()
}

/// Groups of indices sharing a value, each of size at least two.
fn tie_groups(x: &[f64], order: &[usize]) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            let mut g: Vec<usize> = order[start..end].to_vec();
            g.sort_unstable();
            groups.push(g);
        }
        start = end;
    }
    groups.sort();
    groups
}

fn sorted_order(x: &[f64]) -> Result<Vec<usize>> {
    if let Some(i) = x.iter().position(|v| v.is_nan()) {
        return Err(MallowsError::InvalidParameter(format!("coordinate {} is NaN", i + 1)));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    Ok(order)
}

/// Rank vector `Y_i = #{h : x_h <= x_i}`; fails when coordinates tie.
pub fn rank_vector(x: &[f64]) -> Result<Ranking> {
    let order = sorted_order(x)?;
    let groups = tie_groups(x, &order);
    if !groups.is_empty() {
        return Err(MallowsError::TiesPresent { groups });
    }
    let mut ranks = vec![0u32; x.len()];
    for (k, &i) in order.iter().enumerate() {
        ranks[i] = k as u32 + 1;
    }
    Ok(Ranking(ranks))
}

/// Rank vector where tied coordinates share the mean of the ranks they span.
pub fn midrank_vector(x: &[f64]) -> Result<PermutohedronPoint> {
    let order = sorted_order(x)?;
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    PermutohedronPoint::new(ranks)
}

/// `N` observed rankings over a common set of `n` items.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingSample {
    n: usize,
    rows: Vec<Ranking>,
}

impl RankingSample {
    pub fn new(rows: Vec<Ranking>) -> Result<Self> {
        let n = rows.first().map(Ranking::len).ok_or(MallowsError::EmptySample)?;
        Self::with_items(n, rows)
    }

    /// Like [`RankingSample::new`] but allows `N = 0`.
    pub fn with_items(n: usize, rows: Vec<Ranking>) -> Result<Self> {
        for r in &rows {
            check_len(n, r.len())?;
        }
        Ok(Self { n, rows })
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Ranking] {
        &self.rows
    }

    /// Exact per-item rank totals `N * R̄`.
    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n];
        for r in &self.rows {
            for (s, &x) in sums.iter_mut().zip(&r.0) {
                *s += x as u64;
            }
        }
        sums
    }

    /// Total distance `D(ρ) = Σ_j d_S(R_j, ρ)`, computed as `N(2c_n) - 2ρ·ΣR_j`.
    pub fn total_distance(&self, rho: &Ranking) -> Result<u64> {
        check_len(self.n, rho.len())?;
        let cross: u64 = self.column_sums().iter().zip(&rho.0).map(|(&s, &r)| s * r as u64).sum();
        Ok(2 * self.len() as u64 * rank_sq_norm(self.n) - 2 * cross)
    }
}

pub fn sample_mean(s: &RankingSample) -> Result<PermutohedronPoint> {
    if s.is_empty() {
        return Err(MallowsError::EmptySample);
    }
    let n_obs = s.len() as f64;
    let coords = s.column_sums().into_iter().map(|t| t as f64 / n_obs).collect();
    PermutohedronPoint::new(coords)
}

/// Advances `perm` to the next permutation in lexicographic order.
pub(crate) fn next_permutation(perm: &mut [u32]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Calls `f` on every permutation of `1..=n` in lexicographic order.
pub(crate) fn for_each_permutation(n: usize, mut f: impl FnMut(&[u32])) {
    let mut perm: Vec<u32> = (1..=n as u32).collect();
    loop {
        f(&perm);
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

/// Visits, in lexicographic order, the permutations of `1..=n` whose first
/// entry is `first`. The `n` shards partition `P_n` for parallel scans.
pub(crate) fn for_each_in_shard(n: usize, first: u32, mut f: impl FnMut(&[u32])) {
    let mut perm: Vec<u32> = std::iter::once(first)
        .chain((1..=n as u32).filter(|&v| v != first))
        .collect();
    loop {
        f(&perm);
        if !next_permutation(&mut perm[1..]) {
            break;
        }
    }
}

/// Iterator over all rankings of `n` items in lexicographic order.
pub struct Permutations {
    next: Option<Vec<u32>>,
}

impl Iterator for Permutations {
    type Item = Ranking;

    fn next(&mut self) -> Option<Ranking> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_permutation(&mut succ) {
            self.next = Some(succ);
        }
        Some(Ranking(current))
    }
}

pub fn all_rankings(n: usize) -> Permutations {
    Permutations { next: (n > 0).then(|| (1..=n as u32).collect()) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(v: &[u32]) -> Ranking {
        Ranking::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(spearman_distance(&r(&[1, 2, 3]), &r(&[1, 2, 3])).unwrap(), 0);
        assert_eq!(spearman_distance(&r(&[3, 4, 2, 1]), &r(&[2, 1, 3, 4])).unwrap(), 20);
        assert_eq!(spearman_distance(&r(&[2, 1, 4, 3]), &r(&[2, 1, 3, 4])).unwrap(), 2);
        assert!(matches!(
            spearman_distance(&r(&[1, 2]), &r(&[1, 2, 3])),
            Err(MallowsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn invalid_rankings_rejected() {
        assert!(Ranking::new(vec![1, 1, 3]).is_err());
        assert!(Ranking::new(vec![0, 1, 2]).is_err());
        assert!(Ranking::new(vec![1, 2, 4]).is_err());
        assert!(Ranking::new(vec![]).is_err());
        assert_eq!("(2,1,4,3)".parse::<Ranking>().unwrap(), r(&[2, 1, 4, 3]));
        assert_eq!("2 1 3".parse::<Ranking>().unwrap(), r(&[2, 1, 3]));
    }

    #[test]
    fn rank_vector_of_mean() {
        let y = rank_vector(&[1.5, 2.9, 3.8, 4.7, 2.1]).unwrap();
        assert_eq!(y, r(&[1, 3, 4, 5, 2]));
    }

    #[test]
    fn rank_vector_ties_named() {
        match rank_vector(&[3.0; 5]) {
            Err(MallowsError::TiesPresent { groups }) => assert_eq!(groups, vec![vec![0, 1, 2, 3, 4]]),
            other => panic!("unexpected {other:?}"),
        }
        match rank_vector(&[2.2, 1.8, 3.0, 3.0]) {
            Err(MallowsError::TiesPresent { groups }) => assert_eq!(groups, vec![vec![2, 3]]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn midranks_of_averaged_expert_modes() {
        let x = [5.875, 3.875, 3.625, 5.25, 4.125, 4.125, 7.625, 3.25, 7.25, 10.0];
        let y = midrank_vector(&x).unwrap();
        assert_eq!(y.coords(), &[7.0, 3.0, 2.0, 6.0, 4.5, 4.5, 9.0, 1.0, 8.0, 10.0]);
        assert!(y.as_ranking().is_none());
    }

    #[test]
    fn compose_and_inverse() {
        assert_eq!(r(&[2, 1, 3]).compose(&r(&[1, 2, 3])).unwrap(), r(&[2, 1, 3]));
        assert_eq!(r(&[2, 3, 1]).inverse(), r(&[3, 1, 2]));
        for a in all_rankings(4) {
            assert_eq!(a.compose(&a.inverse()).unwrap(), Ranking::identity(4));
        }
    }

    #[test]
    fn right_invariance_exhaustive() {
        for n in 1..=5 {
            let perms: Vec<Ranking> = all_rankings(n).collect();
            for a in &perms {
                for b in &perms {
                    let d = spearman_distance(a, b).unwrap();
                    // every η for n <= 4; a stride of η for n = 5 keeps this quick
                    let step = if n == 5 { 7 } else { 1 };
                    for eta in perms.iter().step_by(step) {
                        let da = a.compose(eta).unwrap();
                        let db = b.compose(eta).unwrap();
                        assert_eq!(spearman_distance(&da, &db).unwrap(), d);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_and_max_distance() {
        for n in 1..=6 {
            let bary = PermutohedronPoint::barycenter(n);
            let id = Ranking::identity(n);
            let mut max = 0;
            let mut count = 0u128;
            for p in all_rankings(n) {
                let d = spearman_distance_real(&p, &bary).unwrap();
                assert!((d - sphere_sq_radius(n)).abs() < 1e-12);
                max = max.max(spearman_distance(&p, &id).unwrap());
                assert_eq!(p.ranks().iter().map(|&x| x as u64).sum::<u64>(), rank_sum(n));
                assert_eq!(p.dot(&p).unwrap(), rank_sq_norm(n));
                count += 1;
            }
            assert_eq!(max, max_distance(n));
            assert_eq!(count, factorial(n));
        }
    }

    #[test]
    fn sample_means() {
        let s = RankingSample::new(vec![r(&[1, 3, 2])]).unwrap();
        assert_eq!(sample_mean(&s).unwrap().coords(), &[1.0, 3.0, 2.0]);
        let s = RankingSample::new(vec![r(&[1, 2]), r(&[2, 1])]).unwrap();
        assert_eq!(sample_mean(&s).unwrap().coords(), &[1.5, 1.5]);
        let empty = RankingSample::with_items(3, vec![]).unwrap();
        assert!(matches!(sample_mean(&empty), Err(MallowsError::EmptySample)));
        assert!(RankingSample::new(vec![r(&[1, 2]), r(&[1, 2, 3])]).is_err());
    }

    #[test]
    fn total_distance_matches_direct_sum() {
        let s = RankingSample::new(vec![r(&[1, 2, 3, 4]), r(&[2, 1, 4, 3]), r(&[4, 3, 2, 1])]).unwrap();
        for rho in all_rankings(4) {
            let direct: u64 = s.rows().iter().map(|x| spearman_distance(x, &rho).unwrap()).sum();
            assert_eq!(s.total_distance(&rho).unwrap(), direct);
        }
    }

    #[test]
    fn point_validation() {
        assert!(PermutohedronPoint::new(vec![1.0, 2.0, 3.5]).is_err());
        assert!(PermutohedronPoint::new(vec![0.5, 2.5, 3.0]).is_err());
        assert!(PermutohedronPoint::new(vec![2.0, 2.0, 2.0]).is_ok());
    }

    #[test]
    fn shards_cover_all_permutations() {
        let mut all = Vec::new();
        for first in 1..=4 {
            for_each_in_shard(4, first, |p| all.push(p.to_vec()));
        }
        let expected: Vec<Vec<u32>> = all_rankings(4).map(Ranking::into_inner).collect();
        assert_eq!(all, expected);
    }

    fn arb_ranking(n: usize) -> impl Strategy<Value = Ranking> {
        Just((1..=n as u32).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(Ranking::from_vec_unchecked)
    }

    proptest! {
        #[test]
        fn strict_rank_vector_is_idempotent(r in (1usize..9).prop_flat_map(arb_ranking)) {
            prop_assert_eq!(rank_vector(&r.to_f64()).unwrap(), r.clone());
            prop_assert_eq!(midrank_vector(&r.to_f64()).unwrap().as_ranking(), Some(r));
        }

        #[test]
        fn midranks_preserve_sum(x in proptest::collection::vec(0u8..4, 1..12)) {
            let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let y = midrank_vector(&xs).unwrap();
            let s: f64 = y.coords().iter().sum();
            prop_assert!((s - rank_sum(xs.len()) as f64).abs() < 1e-12);
        }

        #[test]
        fn distance_is_symmetric(
            (a, b) in (1usize..9).prop_flat_map(|n| (arb_ranking(n), arb_ranking(n)))
        ) {
            let d = spearman_distance(&a, &b).unwrap();
            prop_assert_eq!(d, spearman_distance(&b, &a).unwrap());
            prop_assert_eq!(d == 0, a == b);
            prop_assert_eq!(d % 2, 0);
        }
    }
}
