//! The Mallows model with Spearman's distance:
//! `p(r | ρ, θ) = exp(-θ ||r - ρ||²) / Z(θ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MallowsError, Result};
use crate::inference::leap_shift::leap_and_shift;
use crate::partition::{check_enumerable, DistanceFrequencyTable, N_ENUM_MAX};
use crate::perm::{self, for_each_permutation, rank_distance, sample_mean, Ranking, RankingSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsParams {
    pub rho: Ranking,
    pub theta: f64,
}

impl MmsParams {
    pub fn new(rho: Ranking, theta: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(MallowsError::InvalidParameter(format!("theta must be finite and >= 0, got {theta}")));
        }
        Ok(Self { rho, theta })
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }
}

/// Seed for every stochastic routine; all of them use ChaCha8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent seed for the `k`-th parallel stream.
    pub fn stream(self, k: u64) -> RngSeed {
        RngSeed(self.0.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }
}

fn check_table(n: usize, table: &DistanceFrequencyTable) -> Result<()> {
    if table.n() != n {
        return Err(MallowsError::LengthMismatch { expected: n, found: table.n() });
    }
    Ok(())
}

pub fn log_pmf(r: &Ranking, params: &MmsParams, table: &DistanceFrequencyTable) -> Result<f64> {
    check_table(params.n(), table)?;
    let d = perm::spearman_distance(r, &params.rho)?;
    Ok(-params.theta * d as f64 - table.log_z(params.theta)?)
}

/// `log p(R_1..R_N | ρ, θ) = -θ D(ρ) - N log Z(θ)`.
pub fn log_likelihood(s: &RankingSample, params: &MmsParams, table: &DistanceFrequencyTable) -> Result<f64> {
    check_table(params.n(), table)?;
    let total = s.total_distance(&params.rho)?;
    Ok(-params.theta * total as f64 - s.len() as f64 * table.log_z(params.theta)?)
}

/// `KL[p(·|ρ_a, θ) || p(·|ρ_b, θ)]` by enumeration of `P_n`.
pub fn kl_divergence(rho_a: &Ranking, rho_b: &Ranking, theta: f64, table: &DistanceFrequencyTable) -> Result<f64> {
    let n = rho_a.len();
    check_table(n, table)?;
    perm::spearman_distance(rho_a, rho_b)?;
    check_enumerable(n, N_ENUM_MAX)?;
    let lz = table.log_z(theta)?;
    let mut kl = 0.0;
    for_each_permutation(n, |r| {
        let da = rank_distance(r, rho_a.ranks()) as f64;
        let db = rank_distance(r, rho_b.ranks()) as f64;
        kl += (-theta * da - lz).exp() * theta * (db - da);
    });
    Ok(kl)
}

/// Draws `count` iid rankings by inverse CDF over `P_n` sorted by decreasing
/// probability (ties in lexicographic order).
pub fn sample_exact(
    params: &MmsParams,
    count: usize,
    table: &DistanceFrequencyTable,
    seed: RngSeed,
) -> Result<RankingSample> {
    let n = params.n();
    check_table(n, table)?;
    check_enumerable(n, N_ENUM_MAX)?;
    let lz = table.log_z(params.theta)?;
    let mut support: Vec<(u64, Vec<u32>)> = Vec::with_capacity(perm::factorial(n) as usize);
    for_each_permutation(n, |r| support.push((rank_distance(r, params.rho.ranks()), r.to_vec())));
    // stable sort keeps lexicographic order within equal distances
    support.sort_by_key(|(d, _)| *d);
    let mut cdf = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for (d, _) in &support {
        acc += (-params.theta * *d as f64 - lz).exp();
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = seed.rng();
    let rows = (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u).min(support.len() - 1);
            Ranking::from_vec_unchecked(support[k].1.clone())
        })
        .collect();
    RankingSample::with_items(n, rows)
}

/// Metropolis sampler with Leap-and-Shift proposals targeting `MMS(ρ, θ)`,
/// for `n` beyond the enumeration limit. The chain starts at `ρ`.
pub fn sample_mcmc(
    params: &MmsParams,
    count: usize,
    burn_in: usize,
    thin: usize,
    leap: usize,
    seed: RngSeed,
) -> Result<RankingSample> {
    if thin == 0 {
        return Err(MallowsError::InvalidParameter("thin must be positive".into()));
    }
    let n = params.n();
    let mut rng = seed.rng();
    let mut current = params.rho.clone();
    let mut current_d = 0u64;
    let mut rows = Vec::with_capacity(count);
    let mut t = 0usize;
    while rows.len() < count {
        let prop = leap_and_shift(&current, leap, &mut rng)?;
        let d = rank_distance(prop.rho.ranks(), params.rho.ranks());
        let log_a = -params.theta * (d as f64 - current_d as f64) + prop.log_bwd - prop.log_fwd;
        if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
            current = prop.rho;
            current_d = d;
        }
        if t >= burn_in && (t - burn_in).is_multiple_of(thin) {
            rows.push(current.clone());
        }
        t += 1;
    }
    RankingSample::with_items(n, rows)
}

/// `ρ_MLE = Y(R̄)`, refused when the sample mean has tied coordinates.
pub fn mle_rho(s: &RankingSample) -> Result<Ranking> {
    let mean = sample_mean(s)?;
    perm::rank_vector(mean.coords()).map_err(|e| match e {
        MallowsError::TiesPresent { groups } => MallowsError::NonUniqueMle { groups },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMle {
    pub theta: f64,
    /// The observed mean distance is at least the uniform-model mean, so the
    /// likelihood is maximized at the boundary `θ = 0`.
    pub at_boundary: bool,
}

const THETA_BRACKET_CAP: f64 = 1e6;
const THETA_TOLERANCE: f64 = 1e-10;

/// Solves `E[d | θ] = d̄` for `θ >= 0` by bisection.
pub fn mle_theta_from_mean_distance(mean_distance: f64, table: &DistanceFrequencyTable) -> Result<ThetaMle> {
    if !(mean_distance >= 0.0) {
        return Err(MallowsError::InvalidParameter(format!("mean distance {mean_distance} must be >= 0")));
    }
    if mean_distance == 0.0 {
        return Err(MallowsError::DivergentTheta);
    }
    if mean_distance >= table.expected_distance(0.0)? {
        log::warn!("observed mean distance {mean_distance} is not below the uniform mean; theta MLE is 0");
        return Ok(ThetaMle { theta: 0.0, at_boundary: true });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while table.expected_distance(hi)? >= mean_distance {
        lo = hi;
        hi *= 2.0;
        if hi > THETA_BRACKET_CAP {
            return Err(MallowsError::Numerical(format!(
                "no theta below {THETA_BRACKET_CAP} reaches mean distance {mean_distance}"
            )));
        }
    }
    while hi - lo > THETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if table.expected_distance(mid)? > mean_distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThetaMle { theta: 0.5 * (lo + hi), at_boundary: false })
}

/// Maximum likelihood `θ` given the consensus `rho`.
pub fn mle_theta(s: &RankingSample, rho: &Ranking, table: &DistanceFrequencyTable) -> Result<ThetaMle> {
    if s.is_empty() {
        return Err(MallowsError::EmptySample);
    }
    check_table(rho.len(), table)?;
    let mean_distance = s.total_distance(rho)? as f64 / s.len() as f64;
    mle_theta_from_mean_distance(mean_distance, table)
}
