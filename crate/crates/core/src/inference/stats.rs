use serde::{Deserialize, Serialize};

use crate::error::{MallowsError, Result};
use crate::partition::DistanceFrequencyTable;
use crate::perm::{rank_sq_norm, PermutohedronPoint, Ranking, RankingSample};
use crate::prior::{EmmsPrior, Precision};

/// Everything the posterior needs from the data and the prior.
///
/// The sample enters only through `N` and the column totals `N R̄`, so two
/// samples with the same `(N, R̄)` give bit-identical posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    n_items: usize,
    count: usize,
    totals: Vec<u64>,
    rho0: PermutohedronPoint,
    precision: Precision,
    c_n: f64,
    rho0_sq_norm: f64,
}

impl SufficientStats {
    pub fn new(s: &RankingSample, prior: &EmmsPrior) -> Result<Self> {
        let n = prior.n();
        if s.n_items() != n {
            return Err(MallowsError::LengthMismatch { expected: n, found: s.n_items() });
        }
        Ok(Self {
            n_items: n,
            count: s.len(),
            totals: s.column_sums(),
            rho0: prior.rho0.clone(),
            precision: prior.precision,
            c_n: rank_sq_norm(n) as f64,
            rho0_sq_norm: prior.rho0.sq_norm(),
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Number of observed rankings `N`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// `R̄`, or `None` for an empty sample.
    pub fn rbar(&self) -> Option<Vec<f64>> {
        (self.count > 0).then(|| self.totals.iter().map(|&t| t as f64 / self.count as f64).collect())
    }

    pub fn rho0(&self) -> &PermutohedronPoint {
        &self.rho0
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Prior sample size `N₀`; zero for a fixed `η₀`.
    pub fn n0(&self) -> f64 {
        match self.precision {
            Precision::ThetaLinked { n0 } => n0,
            Precision::FixedEta0(_) => 0.0,
        }
    }

    pub fn eta0(&self, theta: f64) -> f64 {
        match self.precision {
            Precision::ThetaLinked { n0 } => theta * n0,
            Precision::FixedEta0(e) => e,
        }
    }

    /// `R̃ = N R̄ + N₀ ρ₀`.
    pub fn rtilde(&self) -> Vec<f64> {
        let n0 = self.n0();
        self.totals.iter().zip(self.rho0.coords()).map(|(&t, &r)| t as f64 + n0 * r).collect()
    }

    /// `g̃ = (2N + N₀) c_n + N₀ ||ρ₀||²`.
    pub fn g_tilde(&self) -> f64 {
        let n0 = self.n0();
        (2.0 * self.count as f64 + n0) * self.c_n + n0 * self.rho0_sq_norm
    }

    /// `D(ρ) = Σ_j d(R_j, ρ)`, exact.
    pub fn data_distance(&self, rho: &Ranking) -> u64 {
        let dot: u64 = rho.ranks().iter().zip(&self.totals).map(|(&r, &t)| r as u64 * t).sum();
        2 * self.count as u64 * rank_sq_norm(self.n_items) - 2 * dot
    }

    /// `D*(ρ) = d(ρ₀, ρ)`.
    pub fn prior_distance(&self, rho: &Ranking) -> f64 {
        let dot = rho.dot_real(self.rho0.coords());
        (self.c_n + self.rho0_sq_norm - 2.0 * dot).max(0.0)
    }

    /// `w = θ N R̄ + η₀ ρ₀`; the `ρ` full conditional is `∝ exp(2 ρ·w)`.
    pub fn rho_field(&self, theta: f64) -> Vec<f64> {
        let eta0 = self.eta0(theta);
        self.totals.iter().zip(self.rho0.coords()).map(|(&t, &r)| theta * t as f64 + eta0 * r).collect()
    }

    /// `-θ D(ρ) - η₀ D*(ρ)`.
    pub fn log_kernel(&self, rho: &Ranking, theta: f64) -> f64 {
        -theta * self.data_distance(rho) as f64 - self.eta0(theta) * self.prior_distance(rho)
    }
}

/// Prior on the precision `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaPrior {
    /// `∝ sqrt(Var[d | θ])`.
    Jeffreys,
    Exponential { rate: f64 },
    /// Uniform on `[0, upper]`.
    Flat { upper: f64 },
    /// `∝ Z*(θ N₀, ρ₀)`, which cancels the prior normalizer in the linked case.
    ZstarProportional,
}

impl ThetaPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThetaPrior::Exponential { rate: v } | ThetaPrior::Flat { upper: v } if !(v > 0.0) || !v.is_finite() => {
                Err(MallowsError::InvalidParameter(format!("theta prior parameter must be positive, got {v}")))
            }
            _ => Ok(()),
        }
    }

    /// Upper end of the support, if bounded.
    pub fn upper(&self) -> Option<f64> {
        match *self {
            ThetaPrior::Flat { upper } => Some(upper),
            _ => None,
        }
    }

    /// Unnormalized log density; `log_zstar` is `log Z*(θ N₀, ρ₀)` and is
    /// only read by `ZstarProportional`.
    pub fn log_density(&self, theta: f64, table: &DistanceFrequencyTable, log_zstar: f64) -> Result<f64> {
        if theta < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match *self {
            ThetaPrior::Jeffreys => table.jeffreys_log_density(theta)?,
            ThetaPrior::Exponential { rate } => -rate * theta,
            ThetaPrior::Flat { upper } => {
                if theta <= upper {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            ThetaPrior::ZstarProportional => log_zstar,
        })
    }
}

impl std::str::FromStr for ThetaPrior {
    type Err = MallowsError;

    /// `jeffreys`, `exp:<rate>`, `flat:<upper>` or `zstar`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.parse::<f64>().map_err(|_| MallowsError::InvalidParameter(format!("bad number {v:?} in theta prior")))
        };
        let p = match s.split_once(':') {
            None if s == "jeffreys" => ThetaPrior::Jeffreys,
            None if s == "zstar" => ThetaPrior::ZstarProportional,
            Some(("exp", v)) => ThetaPrior::Exponential { rate: parse(v)? },
            Some(("flat", v)) => ThetaPrior::Flat { upper: parse(v)? },
            _ => return Err(MallowsError::InvalidParameter(format!("unknown theta prior {s:?}"))),
        };
        p.validate()?;
        Ok(p)
    }
}

/// How the prior precision relates to `θ` in the joint posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceCase {
    /// `η₀` fixed and independent of `θ`.
    A,
    /// `η₀ = θ N₀` with the exact `Z*(θ N₀, ρ₀)` term.
    B,
    /// `η₀ = θ N₀` with `π(θ) ∝ Z*(θ N₀, ρ₀)`, so `Z*` drops out.
    C,
}

impl std::str::FromStr for InferenceCase {
    type Err = MallowsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Self::A),
            "b" | "B" => Ok(Self::B),
            "c" | "C" => Ok(Self::C),
            other => Err(MallowsError::InvalidParameter(format!("unknown inference case {other:?}"))),
        }
    }
}

/// Rejects prior/case combinations that do not define a posterior.
pub fn check_case(prior: &EmmsPrior, theta_prior: &ThetaPrior, case: InferenceCase) -> Result<()> {
    theta_prior.validate()?;
    match (case, prior.precision) {
        (InferenceCase::A, Precision::ThetaLinked { .. }) => Err(MallowsError::InconsistentConfig(
            "case a needs a fixed eta0; a theta-linked N0 implies case b or c".into(),
        )),
        (InferenceCase::B | InferenceCase::C, Precision::FixedEta0(_)) => Err(MallowsError::InconsistentConfig(
            "cases b and c need a theta-linked prior (N0), not a fixed eta0".into(),
        )),
        (InferenceCase::A, _) if *theta_prior == ThetaPrior::ZstarProportional => Err(MallowsError::InconsistentConfig(
            "the Z*-proportional theta prior is only defined with a theta-linked prior".into(),
        )),
        (InferenceCase::C, _) if *theta_prior != ThetaPrior::ZstarProportional => Err(MallowsError::InconsistentConfig(
            "case c fixes the theta prior to the Z*-proportional one".into(),
        )),
        _ => Ok(()),
    }
}
