//! Partition functions of the Spearman Mallows model.
//!
//! Right-invariance makes `Z(θ) = Σ_{r ∈ P_n} exp(-θ d(r, ρ))` independent of
//! `ρ`, so the whole model is driven by how many permutations sit at each
//! distance from the identity: the [`DistanceFrequencyTable`]. For a mode off
//! the vertex set (the conjugate prior) the normalizer depends on the mode and
//! is computed from a [`DistanceProfile`] of that point instead.
//!
//! Everything is kept in the log domain.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{MallowsError, Result};
use crate::perm::{self, for_each_in_shard, point_distance, PermutohedronPoint};

/// Largest `n` for which tables and normalizers are built by enumeration.
pub const N_ENUM_MAX: usize = 10;

pub fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub(crate) fn check_enumerable(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        return Err(MallowsError::InvalidParameter("n must be at least 1".into()));
    }
    if n > max {
        return Err(MallowsError::EnumerationLimit { n, max });
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta >= 0.0) || theta.is_infinite() {
        return Err(MallowsError::InvalidParameter(format!("theta must be finite and >= 0, got {theta}")));
    }
    Ok(())
}

/// Number of permutations of `P_n` at each Spearman distance from the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceFrequencyTable {
    n: usize,
    entries: Vec<(u64, BigUint)>,
    distances: Vec<f64>,
    log_counts: Vec<f64>,
}

/// Mean and variance of the distance to the mode under `MMS(ρ, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceMoments {
    pub mean: f64,
    pub variance: f64,
}

impl DistanceFrequencyTable {
    /// Validates and wraps `(distance, count)` pairs. Zero counts are dropped.
    pub fn from_counts(n: usize, counts: Vec<(u64, BigUint)>) -> Result<Self> {
        let bad = |msg: String| MallowsError::TableFormat { line: 0, msg };
        if n == 0 {
            return Err(bad("n must be at least 1".into()));
        }
        let d_max = perm::max_distance(n);
        let mut entries: Vec<(u64, BigUint)> = counts.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(bad(format!("distances not strictly increasing at {}", w[1].0)));
            }
        }
        for (d, _) in &entries {
            if d % 2 != 0 || *d > d_max {
                return Err(bad(format!("distance {d} is not an even value in [0, {d_max}]")));
            }
        }
        let sum: BigUint = entries.iter().map(|(_, c)| c).sum();
        let fact = big_factorial(n);
        if sum != fact {
            return Err(MallowsError::CountSum { sum: sum.to_string(), factorial: fact.to_string() });
        }
        if entries.first().map(|(d, c)| (*d, c.clone())) != Some((0, BigUint::from(1u8))) {
            return Err(bad("count at distance 0 must be 1".into()));
        }
        let lookup: HashMap<u64, &BigUint> = entries.iter().map(|(d, c)| (*d, c)).collect();
        for (d, c) in &entries {
            if lookup.get(&(d_max - d)) != Some(&c) {
                return Err(bad(format!("count at {d} differs from count at {}", d_max - d)));
            }
        }
        entries.shrink_to_fit();
        let distances = entries.iter().map(|(d, _)| *d as f64).collect();
        let log_counts = entries.iter().map(|(_, c)| big_ln(c)).collect();
        Ok(Self { n, entries, distances, log_counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(u64, BigUint)] {
        &self.entries
    }

    pub fn count(&self, d: u64) -> BigUint {
        self.entries
            .binary_search_by_key(&d, |(k, _)| *k)
            .map(|i| self.entries[i].1.clone())
            .unwrap_or_default()
    }

    pub fn total(&self) -> BigUint {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    fn log_terms(&self, theta: f64) -> impl Iterator<Item = f64> + '_ {
        self.log_counts.iter().zip(&self.distances).map(move |(lc, d)| lc - theta * d)
    }

    /// `log Z(θ)`.
    pub fn log_z(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(log_sum_exp(self.log_terms(theta)))
    }

    pub fn moments(&self, theta: f64) -> Result<DistanceMoments> {
        check_theta(theta)?;
        let lz = log_sum_exp(self.log_terms(theta));
        let weights: Vec<f64> = self.log_terms(theta).map(|t| (t - lz).exp()).collect();
        let mean: f64 = weights.iter().zip(&self.distances).map(|(w, d)| w * d).sum();
        let variance: f64 = weights.iter().zip(&self.distances).map(|(w, d)| w * (d - mean).powi(2)).sum();
        Ok(DistanceMoments { mean, variance })
    }

    /// `E[d(R, ρ) | θ] = -d/dθ log Z(θ)`.
    pub fn expected_distance(&self, theta: f64) -> Result<f64> {
        Ok(self.moments(theta)?.mean)
    }

    /// `Var[d(R, ρ) | θ] = d²/dθ² log Z(θ)`.
    pub fn variance_distance(&self, theta: f64) -> Result<f64> {
        Ok(self.moments(theta)?.variance)
    }

    /// Unnormalized log Jeffreys density `0.5 log Var[d | θ]`; `-inf` once the
    /// variance underflows.
    pub fn jeffreys_log_density(&self, theta: f64) -> Result<f64> {
        let v = self.variance_distance(theta)?;
        Ok(if v > 0.0 { 0.5 * v.ln() } else { f64::NEG_INFINITY })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "factorial={}", big_factorial(self.n));
        for (d, c) in &self.entries {
            let _ = writeln!(out, "{d} {c}");
        }
        let _ = writeln!(out, "checksum={}", self.total());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let err = |line: usize, msg: &str| MallowsError::TableFormat { line, msg: msg.to_string() };

        let (ln, first) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let n: usize = first
            .strip_prefix("n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(ln, "expected `n=<int>`"))?;
        let (ln, second) = lines.next().ok_or_else(|| err(ln + 1, "missing factorial line"))?;
        let factorial: BigUint = second
            .strip_prefix("factorial=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(ln, "expected `factorial=<int>`"))?;
        if factorial != big_factorial(n) {
            return Err(err(ln, &format!("factorial {factorial} is not {n}!")));
        }

        let mut counts = Vec::new();
        let mut checksum = None;
        for (ln, line) in lines {
            if checksum.is_some() {
                return Err(err(ln, "content after checksum line"));
            }
            if let Some(v) = line.strip_prefix("checksum=") {
                checksum = Some(v.parse::<BigUint>().map_err(|_| err(ln, "unparsable checksum"))?);
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(d), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(ln, "expected `<d> <count>`"));
            };
            let d: u64 = d.parse().map_err(|_| err(ln, "unparsable distance"))?;
            let c: BigUint = c.parse().map_err(|_| err(ln, "unparsable count"))?;
            counts.push((d, c));
        }
        let declared = checksum.ok_or_else(|| err(0, "missing checksum line"))?;
        let counted: BigUint = counts.iter().map(|(_, c)| c).sum();
        if declared != counted {
            return Err(MallowsError::ChecksumMismatch {
                declared: declared.to_string(),
                counted: counted.to_string(),
            });
        }
        Self::from_counts(n, counts)
    }
}

pub fn big_factorial(n: usize) -> BigUint {
    (1..=n as u64).map(BigUint::from).product()
}

fn big_ln(x: &BigUint) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v.ln(),
        _ => {
            // shift into f64 range
            let bits = x.bits();
            let shift = bits.saturating_sub(1000);
            (x >> shift).to_f64().unwrap_or(f64::MAX).ln() + shift as f64 * std::f64::consts::LN_2
        }
    }
}

/// Builds the table by enumerating `P_n`, up to [`N_ENUM_MAX`].
pub fn build_frequency_table(n: usize) -> Result<DistanceFrequencyTable> {
    build_frequency_table_with_limit(n, N_ENUM_MAX)
}

/// Same as [`build_frequency_table`] with a caller-chosen enumeration cap.
pub fn build_frequency_table_with_limit(n: usize, max: usize) -> Result<DistanceFrequencyTable> {
    check_enumerable(n, max)?;
    let slots = perm::max_distance(n) as usize / 2 + 1;
    let identity: Vec<u32> = (1..=n as u32).collect();
    let counts = (1..=n as u32)
        .into_par_iter()
        .map(|first| {
            let mut local = vec![0u64; slots];
            for_each_in_shard(n, first, |p| local[perm::rank_distance(p, &identity) as usize / 2] += 1);
            local
        })
        .reduce(
            || vec![0u64; slots],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let entries = counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (2 * k as u64, BigUint::from(c)))
        .collect();
    DistanceFrequencyTable::from_counts(n, entries)
}

pub fn save_table(table: &DistanceFrequencyTable, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, table.to_text())?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<DistanceFrequencyTable> {
    DistanceFrequencyTable::from_text(&std::fs::read_to_string(path)?)
}

/// Distances from a fixed point `ρ₀` to every ranking, grouped by value.
///
/// `log Z*(η₀, ρ₀) = log Σ_{ρ ∈ P_n} exp(-η₀ ||ρ₀ - ρ||²)` is then a short
/// log-sum-exp over the distinct distances.
#[derive(Debug, Clone)]
pub struct DistanceProfile {
    rho0: PermutohedronPoint,
    distances: Vec<f64>,
    log_counts: Vec<f64>,
}

// distances closer than this are merged into one bucket
const PROFILE_RESOLUTION: f64 = 1e-9;

impl DistanceProfile {
    pub fn new(rho0: &PermutohedronPoint) -> Result<Self> {
        Self::with_limit(rho0, N_ENUM_MAX)
    }

    pub fn with_limit(rho0: &PermutohedronPoint, max: usize) -> Result<Self> {
        let n = rho0.len();
        check_enumerable(n, max)?;
        let x = rho0.coords();
        let merged = (1..=n as u32)
            .into_par_iter()
            .map(|first| {
                let mut local: HashMap<i64, (f64, u64)> = HashMap::new();
                for_each_in_shard(n, first, |p| {
                    let d = point_distance(p, x);
                    local.entry((d / PROFILE_RESOLUTION).round() as i64).or_insert((d, 0)).1 += 1;
                });
                local
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, (d, c)) in b {
                    a.entry(k).or_insert((d, 0)).1 += c;
                }
                a
            });
        let mut buckets: Vec<(i64, (f64, u64))> = merged.into_iter().collect();
        buckets.sort_unstable_by_key(|(k, _)| *k);
        let distances = buckets.iter().map(|(_, (d, _))| *d).collect();
        let log_counts = buckets.iter().map(|(_, (_, c))| (*c as f64).ln()).collect();
        Ok(Self { rho0: rho0.clone(), distances, log_counts })
    }

    pub fn rho0(&self) -> &PermutohedronPoint {
        &self.rho0
    }

    pub fn log_z_star(&self, eta0: f64) -> Result<f64> {
        check_theta(eta0)?;
        Ok(log_sum_exp(self.log_counts.iter().zip(&self.distances).map(|(lc, d)| lc - eta0 * d)))
    }
}

/// Exact `log Z*(η₀, ρ₀)` by enumeration of `P_n`.
pub fn log_z_star(eta0: f64, rho0: &PermutohedronPoint) -> Result<f64> {
    DistanceProfile::new(rho0)?.log_z_star(eta0)
}

/// `log Z*` tabulated on an increasing grid of `η₀`, linearly interpolated.
#[derive(Debug, Clone)]
pub struct ZStarGrid {
    rho0: PermutohedronPoint,
    eta_grid: Vec<f64>,
    log_zstar_values: Vec<f64>,
}

pub const ZSTAR_GRID_NODES: usize = 256;

impl ZStarGrid {
    pub fn build(profile: &DistanceProfile, eta_grid: Vec<f64>) -> Result<Self> {
        if eta_grid.len() < 2 {
            return Err(MallowsError::InvalidParameter("eta grid needs at least two nodes".into()));
        }
        if eta_grid.windows(2).any(|w| !(w[0] < w[1])) || eta_grid[0] < 0.0 {
            return Err(MallowsError::InvalidParameter("eta grid must be nonnegative and strictly increasing".into()));
        }
        let log_zstar_values = eta_grid.iter().map(|&e| profile.log_z_star(e)).collect::<Result<Vec<_>>>()?;
        if log_zstar_values.iter().any(|v| !v.is_finite()) {
            return Err(MallowsError::Numerical("non-finite log Z* on grid".into()));
        }
        Ok(Self { rho0: profile.rho0().clone(), eta_grid, log_zstar_values })
    }

    /// `nodes` equally spaced points on `[0, eta_max]`.
    pub fn uniform(profile: &DistanceProfile, eta_max: f64, nodes: usize) -> Result<Self> {
        if !(eta_max > 0.0) || nodes < 2 {
            return Err(MallowsError::InvalidParameter(format!("invalid grid [0, {eta_max}] with {nodes} nodes")));
        }
        let step = eta_max / (nodes - 1) as f64;
        let grid = (0..nodes).map(|i| if i + 1 == nodes { eta_max } else { i as f64 * step }).collect();
        Self::build(profile, grid)
    }

    pub fn rho0(&self) -> &PermutohedronPoint {
        &self.rho0
    }

    pub fn eta_grid(&self) -> &[f64] {
        &self.eta_grid
    }

    pub fn log_zstar_values(&self) -> &[f64] {
        &self.log_zstar_values
    }

    pub fn range(&self) -> (f64, f64) {
        (self.eta_grid[0], *self.eta_grid.last().unwrap())
    }

    pub fn covers(&self, eta0: f64) -> bool {
        let (lo, hi) = self.range();
        eta0 >= lo && eta0 <= hi
    }

    pub fn interpolate(&self, eta0: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !self.covers(eta0) {
            return Err(MallowsError::OutOfGrid { eta: eta0, lo, hi });
        }
        let k = self.eta_grid.partition_point(|&e| e <= eta0);
        if k == self.eta_grid.len() {
            return Ok(*self.log_zstar_values.last().unwrap());
        }
        let (e0, e1) = (self.eta_grid[k - 1], self.eta_grid[k]);
        let (v0, v1) = (self.log_zstar_values[k - 1], self.log_zstar_values[k]);
        let t = (eta0 - e0) / (e1 - e0);
        Ok(v0 + t * (v1 - v0))
    }
}

pub fn interpolate_log_zstar(grid: &ZStarGrid, eta0: f64) -> Result<f64> {
    grid.interpolate(eta0)
}
