//! The conjugate prior for the consensus ranking and its elicitation.
//!
//! The prior has the same kernel as the model but its mode `ρ₀` may be any
//! point of the permutohedron:
//!
//! ```text
//! π(ρ | ρ₀, η₀) = exp(-η₀ ||ρ₀ - ρ||²) / Z*(η₀, ρ₀)
//! ```
//!
//! Combined with `N` observations at precision `θ` the posterior is again of
//! this form, with mode `ρ_N = (θN R̄ + η₀ ρ₀) / (η₀ + θN)` and precision
//! `η_N = η₀ + θN`. Mode and precision are computed in exact rational
//! arithmetic from the `f64` inputs so that coordinates which are equal in
//! exact arithmetic come out bit-identical (and tie detection is reliable).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{MallowsError, Result};
use crate::partition::DistanceProfile;
use crate::perm::{self, PermutohedronPoint, Ranking, RankingSample};

/// How the prior precision is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// `η₀` fixed, a priori independent of `θ`.
    FixedEta0(f64),
    /// `η₀ = θ N₀`, with `N₀` read as a prior sample size.
    ThetaLinked { n0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmmsPrior {
    pub rho0: PermutohedronPoint,
    pub precision: Precision,
}

impl EmmsPrior {
    pub fn new(rho0: PermutohedronPoint, precision: Precision) -> Result<Self> {
        let v = match precision {
            Precision::FixedEta0(e) => e,
            Precision::ThetaLinked { n0 } => n0,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(MallowsError::InvalidParameter(format!("prior precision must be finite and >= 0, got {v}")));
        }
        Ok(Self { rho0, precision })
    }

    pub fn fixed(rho0: PermutohedronPoint, eta0: f64) -> Result<Self> {
        Self::new(rho0, Precision::FixedEta0(eta0))
    }

    pub fn linked(rho0: PermutohedronPoint, n0: f64) -> Result<Self> {
        Self::new(rho0, Precision::ThetaLinked { n0 })
    }

    /// The uniform prior on `P_n`.
    pub fn uniform(n: usize) -> Self {
        Self { rho0: PermutohedronPoint::barycenter(n), precision: Precision::FixedEta0(0.0) }
    }

    pub fn n(&self) -> usize {
        self.rho0.len()
    }

    pub fn is_linked(&self) -> bool {
        matches!(self.precision, Precision::ThetaLinked { .. })
    }

    /// `η₀`, resolving the linked parametrization at `theta`.
    pub fn eta0(&self, theta: Option<f64>) -> Result<f64> {
        match self.precision {
            Precision::FixedEta0(e) => Ok(e),
            Precision::ThetaLinked { n0 } => Ok(theta.ok_or(MallowsError::MissingTheta)? * n0),
        }
    }

    /// Precision ratio `γ = η₀ / θ`.
    pub fn gamma(&self, theta: f64) -> Result<f64> {
        match self.precision {
            Precision::ThetaLinked { n0 } => Ok(n0),
            Precision::FixedEta0(e) if theta > 0.0 => Ok(e / theta),
            Precision::FixedEta0(_) => Err(MallowsError::InvalidParameter("gamma is undefined at theta = 0".into())),
        }
    }
}

/// `log π(ρ | ρ₀, η₀)`; the `-log Z*` term is included only when `normalized`.
pub fn emms_log_density(rho: &Ranking, prior: &EmmsPrior, theta_for_link: Option<f64>, normalized: bool) -> Result<f64> {
    let eta0 = prior.eta0(theta_for_link)?;
    let d = perm::spearman_distance_real(rho, &prior.rho0)?;
    let mut v = -eta0 * d;
    if normalized {
        v -= DistanceProfile::new(&prior.rho0)?.log_z_star(eta0)?;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorParams {
    pub rho_n: PermutohedronPoint,
    pub eta_n: f64,
}

pub(crate) fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Closed-form update of the conjugate prior by `s` at precision `theta`.
pub fn posterior_update(prior: &EmmsPrior, s: &RankingSample, theta: f64) -> Result<PosteriorParams> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(MallowsError::InvalidParameter(format!("theta must be finite and >= 0, got {theta}")));
    }
    let n = prior.n();
    if s.n_items() != n {
        return Err(MallowsError::LengthMismatch { expected: n, found: s.n_items() });
    }
    let eta0 = prior.eta0(Some(theta))?;
    let eta_n = eta0 + theta * s.len() as f64;
    let totals: Vec<BigRational> = s.column_sums().into_iter().map(|t| BigRational::from_integer(BigInt::from(t))).collect();
    let rho0: Vec<BigRational> = prior.rho0.coords().iter().map(|&x| rational(x)).collect();

    // weights on (Σ R_j) and ρ₀; θ cancels in the linked parametrization
    let (w_data, w_prior) = match prior.precision {
        Precision::ThetaLinked { n0 } => (BigRational::from_integer(1.into()), rational(n0)),
        Precision::FixedEta0(e) => (rational(theta), rational(e)),
    };
    let denom = &w_data * BigRational::from_integer(BigInt::from(s.len())) + &w_prior;
    if s.is_empty() || denom.is_zero() {
        return Ok(PosteriorParams { rho_n: prior.rho0.clone(), eta_n });
    }
    let coords = totals
        .iter()
        .zip(&rho0)
        .map(|(t, r)| rational_to_f64(&((&w_data * t + &w_prior * r) / &denom)))
        .collect();
    Ok(PosteriorParams { rho_n: PermutohedronPoint::new(coords)?, eta_n })
}

/// `ρ_MAP = Y(ρ_N)`; fails with `TiesPresent` when `ρ_N` has tied coordinates.
pub fn map_estimate(pp: &PosteriorParams) -> Result<Ranking> {
    perm::rank_vector(pp.rho_n.coords())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorOrder {
    FirstHigher,
    SecondHigher,
    Equal,
}

/// Orders two rankings by posterior probability from `D(ρ) = Σ_j d(R_j, ρ)`,
/// `D*(ρ) = d(ρ₀, ρ)` and `γ = η₀/θ`: `ρ₁` is more probable iff
/// `D(ρ₁) - D(ρ₂) < γ (D*(ρ₂) - D*(ρ₁))`. Evaluated in exact arithmetic.
pub fn compare_posterior_order(
    rho1: &Ranking,
    rho2: &Ranking,
    s: &RankingSample,
    rho0: &PermutohedronPoint,
    gamma: f64,
) -> Result<PosteriorOrder> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(MallowsError::InvalidParameter(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let d1 = BigInt::from(s.total_distance(rho1)?);
    let d2 = BigInt::from(s.total_distance(rho2)?);
    let lhs = BigRational::from_integer(d1 - d2);
    let rhs = rational(gamma) * (exact_sq_distance(rho2, rho0)? - exact_sq_distance(rho1, rho0)?);
    Ok(match lhs.cmp(&rhs) {
        std::cmp::Ordering::Less => PosteriorOrder::FirstHigher,
        std::cmp::Ordering::Greater => PosteriorOrder::SecondHigher,
        std::cmp::Ordering::Equal => PosteriorOrder::Equal,
    })
}

fn exact_sq_distance(rho: &Ranking, x: &PermutohedronPoint) -> Result<BigRational> {
    if rho.len() != x.len() {
        return Err(MallowsError::LengthMismatch { expected: rho.len(), found: x.len() });
    }
    Ok(rho
        .ranks()
        .iter()
        .zip(x.coords())
        .map(|(&r, &c)| {
            let diff = BigRational::from_integer(BigInt::from(r)) - rational(c);
            &diff * &diff
        })
        .sum())
}

/// Prior mode from a top-`k` list: `top` pairs a (0-based) item with its
/// rank in `1..=k`; the remaining `n - k` items share `(n + k + 1) / 2`.
pub fn elicit_topk(n: usize, top: &[(usize, u32)]) -> Result<PermutohedronPoint> {
    let k = top.len();
    if k > n {
        return Err(MallowsError::InvalidParameter(format!("{k} top ranks for only {n} items")));
    }
    let fill = (n + k + 1) as f64 / 2.0;
    let mut coords = vec![fill; n];
    let mut item_seen = vec![false; n];
    let mut rank_seen = vec![false; k];
    for &(item, rank) in top {
        if item >= n || std::mem::replace(&mut item_seen[item], true) {
            return Err(MallowsError::InvalidParameter(format!("item {} is invalid or repeated", item + 1)));
        }
        if rank == 0 || rank as usize > k {
            return Err(MallowsError::InvalidParameter(format!("rank {rank} is outside 1..={k}")));
        }
        if std::mem::replace(&mut rank_seen[rank as usize - 1], true) {
            return Err(MallowsError::InvalidParameter(format!("rank {rank} is assigned twice")));
        }
        coords[item] = rank as f64;
    }
    PermutohedronPoint::new(coords)
}

/// Convex combination of expert modes; uniform weights when `weights` is `None`.
pub fn elicit_multi_expert(modes: &[PermutohedronPoint], weights: Option<&[f64]>) -> Result<PermutohedronPoint> {
    let first = modes.first().ok_or_else(|| MallowsError::InvalidParameter("no expert modes given".into()))?;
    let n = first.len();
    if let Some(m) = modes.iter().find(|m| m.len() != n) {
        return Err(MallowsError::LengthMismatch { expected: n, found: m.len() });
    }
    let coords = match weights {
        None => (0..n)
            .map(|i| modes.iter().map(|m| m.coords()[i]).sum::<f64>() / modes.len() as f64)
            .collect(),
        Some(w) => {
            if w.len() != modes.len() {
                return Err(MallowsError::LengthMismatch { expected: modes.len(), found: w.len() });
            }
            if w.iter().any(|&x| !(x >= 0.0)) {
                return Err(MallowsError::InvalidParameter("expert weights must be nonnegative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(MallowsError::InvalidParameter(format!("expert weights sum to {total}, not 1")));
            }
            (0..n).map(|i| modes.iter().zip(w).map(|(m, wk)| wk * m.coords()[i]).sum()).collect()
        }
    };
    PermutohedronPoint::new(coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    HigherIsBetter,
    LowerIsBetter,
}

impl std::str::FromStr for Orientation {
    type Err = MallowsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" | "higher_is_better" | "desc" => Ok(Self::HigherIsBetter),
            "lower" | "lower_is_better" | "asc" => Ok(Self::LowerIsBetter),
            other => Err(MallowsError::InvalidParameter(format!("unknown orientation {other:?}"))),
        }
    }
}

/// Item-by-covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub items: Vec<String>,
    pub covariates: Vec<String>,
    /// `values[item][covariate]`
    pub values: Vec<Vec<f64>>,
}

impl CovariateTable {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateElicitation {
    pub items: Vec<String>,
    /// Midrank vector induced by each covariate, rank 1 = most preferred.
    pub columns: Vec<(String, PermutohedronPoint)>,
    /// Average of the covariate rank vectors.
    pub rho0: PermutohedronPoint,
    pub warnings: Vec<String>,
}

/// Ranks every covariate (midranks on ties) in its preferred direction and
/// averages the resulting vectors into a prior mode.
pub fn elicit_from_covariates(table: &CovariateTable, orientations: &[Orientation]) -> Result<CovariateElicitation> {
    if orientations.len() != table.covariates.len() {
        return Err(MallowsError::LengthMismatch { expected: table.covariates.len(), found: orientations.len() });
    }
    if table.items.is_empty() || table.covariates.is_empty() {
        return Err(MallowsError::InvalidParameter("covariate table is empty".into()));
    }
    let mut warnings = Vec::new();
    let mut columns = Vec::with_capacity(orientations.len());
    for (j, (name, orient)) in table.covariates.iter().zip(orientations).enumerate() {
        let col = table.column(j);
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(MallowsError::InvalidParameter(format!("covariate {name} has a missing value for {}", table.items[i])));
        }
        if col.iter().all(|&v| v == col[0]) {
            let msg = format!("covariate {name} is constant; it contributes the barycenter");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let keyed: Vec<f64> = match orient {
            Orientation::HigherIsBetter => col.iter().map(|v| -v).collect(),
            Orientation::LowerIsBetter => col,
        };
        columns.push((name.clone(), perm::midrank_vector(&keyed)?));
    }
    let modes: Vec<PermutohedronPoint> = columns.iter().map(|(_, p)| p.clone()).collect();
    let rho0 = elicit_multi_expert(&modes, None)?;
    Ok(CovariateElicitation { items: table.items.clone(), columns, rho0, warnings })
}
