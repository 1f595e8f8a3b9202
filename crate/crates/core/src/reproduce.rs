//! Reproduction pipelines: the four-item simulation study, the sushi prior
//! elicitation and the qualitative check on the `idea` word-association data.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inference::{
    exact_posterior_joint, run_mcmc, summarize, InferenceCase, McmcConfig, ThetaPrior,
};
use crate::model::{mle_rho, mle_theta, sample_exact, MmsParams, RngSeed};
use crate::partition::DistanceFrequencyTable;
use crate::perm::{all_rankings, midrank_vector, PermutohedronPoint, Ranking, RankingSample};
use crate::prior::{elicit_from_covariates, CovariateElicitation, CovariateTable, EmmsPrior, Orientation};

pub const TABLE1_TRUE_RHO: [u32; 4] = [2, 1, 4, 3];
pub const TABLE1_TRUE_THETA: f64 = 0.06;
pub const TABLE1_SAMPLE_SIZE: usize = 30;
pub const TABLE1_RHO0: [u32; 4] = [2, 1, 3, 4];
pub const TABLE1_N0: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 16.0, 20.0];
/// Seed of the simulated sample; its rank totals are (70, 65, 90, 75), i.e.
/// `R̄ = (2.33, 2.17, 3, 2.5)` as published.
pub const TABLE1_SAMPLE_SEED: u64 = 5040;
pub const TABLE1_MCMC_SEED: u64 = 20_240_611;

/// Published EPPs; rows follow the lexicographic order of the 24 rankings,
/// columns follow [`TABLE1_N0`].
pub const TABLE1_PRINTED_EPP: [[f64; 6]; 24] = [
    [0.029, 0.038, 0.050, 0.053, 0.053, 0.050],
    [0.172, 0.125, 0.080, 0.052, 0.050, 0.036],
    [0.007, 0.003, 0.003, 0.004, 0.004, 0.004],
    [0.049, 0.010, 0.005, 0.004, 0.004, 0.003],
    [0.004, 0.001, 0.001, 0.002, 0.002, 0.001],
    [0.007, 0.002, 0.001, 0.002, 0.001, 0.001],
    [0.048, 0.129, 0.257, 0.417, 0.436, 0.546],
    [0.367, 0.579, 0.527, 0.410, 0.386, 0.303],
    [0.003, 0.001, 0.001, 0.002, 0.002, 0.002],
    [0.029, 0.005, 0.003, 0.002, 0.002, 0.002],
    [0.002, 0.001, 0.001, 0.001, 0.001, 0.001],
    [0.006, 0.001, 0.001, 0.001, 0.001, 0.001],
    [0.009, 0.010, 0.015, 0.017, 0.023, 0.022],
    [0.169, 0.065, 0.032, 0.016, 0.017, 0.012],
    [0.003, 0.002, 0.002, 0.003, 0.003, 0.003],
    [0.049, 0.007, 0.004, 0.002, 0.002, 0.002],
    [0.002, 0.001, 0.001, 0.001, 0.001, 0.001],
    [0.003, 0.001, 0.001, 0.001, 0.001, 0.001],
    [0.007, 0.005, 0.004, 0.004, 0.004, 0.004],
    [0.019, 0.007, 0.006, 0.004, 0.004, 0.004],
    [0.003, 0.002, 0.001, 0.001, 0.002, 0.001],
    [0.009, 0.002, 0.002, 0.001, 0.001, 0.001],
    [0.002, 0.001, 0.001, 0.001, 0.001, 0.001],
    [0.003, 0.001, 0.001, 0.001, 0.001, 0.000],
];
pub const TABLE1_PRINTED_THETA_MEAN: [f64; 6] = [0.068, 0.074, 0.065, 0.060, 0.057, 0.055];
/// Published `D(ρ)` and `D*(ρ)` columns, same row order.
pub const TABLE1_PRINTED_D: [u64; 24] = [
    260, 230, 310, 250, 330, 300, 250, 220, 350, 260, 370, 310, 290, 230, 340, 250, 380, 350, 300, 270, 350, 290, 370, 340,
];
pub const TABLE1_PRINTED_DSTAR: [u64; 24] = [2, 4, 6, 10, 12, 14, 0, 2, 8, 14, 14, 18, 2, 6, 6, 12, 18, 20, 6, 8, 10, 14, 16, 18];

/// Regenerates the simulated sample.
pub fn table1_sample(seed: RngSeed, table: &DistanceFrequencyTable) -> Result<RankingSample> {
    let params = MmsParams::new(Ranking::new(TABLE1_TRUE_RHO.to_vec())?, TABLE1_TRUE_THETA)?;
    sample_exact(&params, TABLE1_SAMPLE_SIZE, table, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Config {
    pub mcmc: McmcConfig,
    pub theta_prior: ThetaPrior,
    pub sample_seed: RngSeed,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            mcmc: McmcConfig { seed: RngSeed(TABLE1_MCMC_SEED), ..McmcConfig::default() },
            theta_prior: ThetaPrior::Jeffreys,
            sample_seed: RngSeed(TABLE1_SAMPLE_SEED),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Column {
    pub n0: f64,
    /// MCMC EPPs in the row order of [`TABLE1_PRINTED_EPP`].
    pub epp: Vec<f64>,
    pub theta_mean: f64,
    pub theta_ci: (f64, f64),
    pub map_ranking: Ranking,
    pub map_tied: bool,
    pub accept_rho: f64,
    pub accept_theta: Option<f64>,
    /// Posterior by enumeration and quadrature, for reference.
    pub exact_epp: Vec<f64>,
    pub exact_theta_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub config: Table1Config,
    pub rankings: Vec<Ranking>,
    pub rank_totals: Vec<u64>,
    pub rho_mle: Option<Ranking>,
    pub theta_mle: Option<f64>,
    pub columns: Vec<Table1Column>,
}

impl Table1Report {
    /// `(row, column, mcmc - printed)` for every cell.
    pub fn deltas(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(144);
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &p) in col.epp.iter().enumerate() {
                out.push((i, j, p - TABLE1_PRINTED_EPP[i][j]));
            }
        }
        out
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.deltas().iter().map(|d| d.2.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_theta_delta(&self) -> f64 {
        self.columns
            .iter()
            .zip(TABLE1_PRINTED_THETA_MEAN)
            .map(|(c, t)| (c.theta_mean - t).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let totals: Vec<String> = self.rank_totals.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(
            s,
            "simulated sample: N = {TABLE1_SAMPLE_SIZE}, rho* = (2,1,4,3), theta* = {TABLE1_TRUE_THETA}, rank totals ({})",
            totals.join(",")
        );
        if let (Some(r), Some(t)) = (&self.rho_mle, self.theta_mle) {
            let _ = writeln!(s, "rho MLE = {r}, theta MLE = {t:.4}");
        }
        let _ = writeln!(
            s,
            "prior mode rho0 = (2,1,3,4), eta0 = theta * N0; {} iterations, burn-in {}, seed {}",
            self.config.mcmc.iterations, self.config.mcmc.burn_in, self.config.mcmc.seed.0
        );
        let _ = write!(s, "{:<11}", "ranking");
        for c in &self.columns {
            let _ = write!(s, "{:>17}", format!("N0={}", c.n0));
        }
        let _ = writeln!(s, "{:>6}{:>6}", "D", "D*");
        for (i, x) in self.rankings.iter().enumerate() {
            let _ = write!(s, "{:<11}", x.to_string());
            for (j, c) in self.columns.iter().enumerate() {
                let cell = format!("{:.3} ({:+.3})", c.epp[i], c.epp[i] - TABLE1_PRINTED_EPP[i][j]);
                let _ = write!(s, "{cell:>17}");
            }
            let _ = writeln!(s, "{:>6}{:>6}", TABLE1_PRINTED_D[i], TABLE1_PRINTED_DSTAR[i]);
        }
        let _ = write!(s, "{:<11}", "theta mean");
        for (c, t) in self.columns.iter().zip(TABLE1_PRINTED_THETA_MEAN) {
            let cell = format!("{:.3} ({:+.3})", c.theta_mean, c.theta_mean - t);
            let _ = write!(s, "{cell:>17}");
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<11}", "MAP");
        for c in &self.columns {
            let cell = format!("{}{}", c.map_ranking, if c.map_tied { "*" } else { "" });
            let _ = write!(s, "{cell:>17}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "max |delta| EPP = {:.4}, theta mean = {:.4}", self.max_abs_delta(), self.max_abs_theta_delta());
        s
    }
}

/// Runs the simulation study: one chain per prior sample size, in parallel.
pub fn reproduce_table1(config: &Table1Config, table: &DistanceFrequencyTable) -> Result<Table1Report> {
    let sample = table1_sample(config.sample_seed, table)?;
    let rankings: Vec<Ranking> = all_rankings(4).collect();
    let rho0 = PermutohedronPoint::from(&Ranking::new(TABLE1_RHO0.to_vec())?);
    let rho_mle = mle_rho(&sample).ok();
    let theta_mle = match &rho_mle {
        Some(r) => mle_theta(&sample, r, table).ok().map(|m| m.theta),
        None => None,
    };
    let columns = TABLE1_N0
        .par_iter()
        .enumerate()
        .map(|(k, &n0)| {
            let prior = EmmsPrior::linked(rho0.clone(), n0)?;
            let mcmc = McmcConfig { seed: config.mcmc.seed.stream(k as u64), ..config.mcmc.clone() };
            let trace = run_mcmc(&sample, &prior, &config.theta_prior, &mcmc, Some(table))?;
            let summary = summarize(&trace)?;
            let exact = exact_posterior_joint(&sample, &prior, &config.theta_prior, mcmc.case, table, None)?;
            Ok(Table1Column {
                n0,
                epp: rankings.iter().map(|x| summary.epp_of(x)).collect(),
                theta_mean: summary.theta_mean,
                theta_ci: summary.theta_ci,
                map_ranking: summary.map_ranking,
                map_tied: summary.map_tied,
                accept_rho: trace.accept_rho,
                accept_theta: trace.accept_theta,
                exact_epp: rankings.iter().map(|x| exact.probabilities[x]).collect(),
                exact_theta_mean: exact.theta_mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Report {
        config: config.clone(),
        rankings,
        rank_totals: sample.column_sums(),
        rho_mle,
        theta_mle,
        columns,
    })
}

pub const SUSHI_ITEMS: [&str; 10] = [
    "shrimp",
    "sea eel",
    "tuna",
    "squid",
    "sea urchin",
    "salmon roe",
    "egg",
    "fatty tuna",
    "tuna roll",
    "cucumber roll",
];
pub const SUSHI_COVARIATES: [&str; 4] = ["oil", "eat", "price", "sell"];
/// Small `oil` values mean oilier items, which are preferred.
pub const SUSHI_ORIENTATIONS: [Orientation; 4] = [
    Orientation::LowerIsBetter,
    Orientation::HigherIsBetter,
    Orientation::HigherIsBetter,
    Orientation::HigherIsBetter,
];
pub const SUSHI_VALUES: [[f64; 4]; 10] = [
    [2.73, 2.14, 1.84, 0.84],
    [0.93, 1.99, 1.99, 0.88],
    [1.77, 2.35, 1.87, 0.88],
    [2.69, 2.04, 1.52, 0.92],
    [0.81, 1.64, 3.29, 0.88],
    [1.26, 1.98, 2.70, 0.88],
    [2.37, 1.87, 1.03, 0.84],
    [0.55, 2.06, 4.49, 0.80],
    [2.25, 1.88, 1.58, 0.44],
    [3.73, 1.46, 1.02, 0.40],
];
/// Published rank vector of every covariate, by item.
pub const SUSHI_PRINTED_RANKS: [[f64; 4]; 10] = [
    [9.0, 2.0, 6.0, 6.5],
    [3.0, 5.0, 4.0, 3.5],
    [5.0, 1.0, 5.0, 3.5],
    [8.0, 4.0, 8.0, 1.0],
    [2.0, 9.0, 2.0, 3.5],
    [4.0, 6.0, 3.0, 3.5],
    [7.0, 8.0, 9.0, 6.5],
    [1.0, 3.0, 1.0, 8.0],
    [6.0, 7.0, 7.0, 9.0],
    [10.0, 10.0, 10.0, 10.0],
];
pub const SUSHI_PRINTED_RHO01: [f64; 10] = [5.875, 3.875, 3.625, 5.25, 4.125, 4.125, 7.625, 3.25, 7.25, 10.0];
pub const SUSHI_PRINTED_RHO02: [f64; 10] = [7.0, 3.0, 2.0, 6.0, 4.5, 4.5, 9.0, 1.0, 8.0, 10.0];

pub fn sushi_covariates() -> CovariateTable {
    CovariateTable {
        items: SUSHI_ITEMS.iter().map(|s| s.to_string()).collect(),
        covariates: SUSHI_COVARIATES.iter().map(|s| s.to_string()).collect(),
        values: SUSHI_VALUES.iter().map(|r| r.to_vec()).collect(),
    }
}

fn fmt_rank(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

fn fmt_vector(v: &[f64]) -> String {
    format!("({})", v.iter().map(|&x| fmt_rank(x)).collect::<Vec<_>>().join(","))
}

/// Item-by-covariate table of rank vectors.
pub fn render_rank_table(items: &[String], covariates: &[String], ranks: &[Vec<f64>]) -> String {
    let width = items.iter().map(|s| s.len()).max().unwrap_or(0).max("item".len()) + 2;
    let mut s = format!("{:<width$}", "item");
    for c in covariates {
        let _ = write!(s, "{c:>7}");
    }
    s.push('\n');
    for (item, row) in items.iter().zip(ranks) {
        let _ = write!(s, "{item:<width$}");
        for &x in row {
            let _ = write!(s, "{:>7}", fmt_rank(x));
        }
        s.push('\n');
    }
    s
}

pub fn printed_table4_text() -> String {
    let items: Vec<String> = SUSHI_ITEMS.iter().map(|s| s.to_string()).collect();
    let covs: Vec<String> = SUSHI_COVARIATES.iter().map(|s| s.to_string()).collect();
    let ranks: Vec<Vec<f64>> = SUSHI_PRINTED_RANKS.iter().map(|r| r.to_vec()).collect();
    render_rank_table(&items, &covs, &ranks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationReport {
    pub elicitation: CovariateElicitation,
    /// Rank vector of the averaged mode (midranks on ties).
    pub rho0_rank_vector: PermutohedronPoint,
    pub table_text: String,
}

impl ElicitationReport {
    pub fn to_text(&self) -> String {
        format!(
            "{}\nrho0 (average) = {}\nrho0 (rank vector) = {}\n",
            self.table_text,
            fmt_vector(self.elicitation.rho0.coords()),
            fmt_vector(self.rho0_rank_vector.coords())
        )
    }
}

pub fn elicitation_report(table: &CovariateTable, orientations: &[Orientation]) -> Result<ElicitationReport> {
    let elicitation = elicit_from_covariates(table, orientations)?;
    let rho0_rank_vector = midrank_vector(elicitation.rho0.coords())?;
    let ranks: Vec<Vec<f64>> = (0..table.items.len())
        .map(|i| elicitation.columns.iter().map(|(_, p)| p.coords()[i]).collect())
        .collect();
    let names: Vec<String> = elicitation.columns.iter().map(|(n, _)| n.clone()).collect();
    let table_text = render_rank_table(&table.items, &names, &ranks);
    Ok(ElicitationReport { elicitation, rho0_rank_vector, table_text })
}

pub fn reproduce_sushi() -> Result<ElicitationReport> {
    elicitation_report(&sushi_covariates(), &SUSHI_ORIENTATIONS)
}

/// Prior mode for the `idea` data: ordering (thought, dream, theory, play, attention).
pub const IDEA_RHO0: [u32; 5] = [1, 4, 3, 2, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaReport {
    pub n0: Vec<f64>,
    pub epp_rho0: Vec<f64>,
    pub modal: Vec<Ranking>,
    /// EPP of the prior mode never decreases as `N₀` grows.
    pub weakly_increasing: bool,
    /// The prior mode is the most probable ranking at `N₀ = N`.
    pub modal_at_full_weight: bool,
}

/// Exact posteriors at `N₀ ∈ {0, 1, 5, 10, N/2, N}` (case b, Jeffreys).
pub fn idea_check(s: &RankingSample, table: &DistanceFrequencyTable) -> Result<IdeaReport> {
    let rho0 = Ranking::new(IDEA_RHO0.to_vec())?;
    if s.n_items() != rho0.len() {
        return Err(crate::MallowsError::LengthMismatch { expected: rho0.len(), found: s.n_items() });
    }
    let big = s.len() as f64;
    let n0: Vec<f64> = vec![0.0, 1.0, 5.0, 10.0, (big / 2.0).floor(), big];
    let mut epp_rho0 = Vec::new();
    let mut modal = Vec::new();
    for &v in &n0 {
        let prior = EmmsPrior::linked(PermutohedronPoint::from(&rho0), v)?;
        let post = exact_posterior_joint(s, &prior, &ThetaPrior::Jeffreys, InferenceCase::B, table, None)?.probabilities;
        epp_rho0.push(post[&rho0]);
        let best = post.iter().max_by(|a, b| a.1.total_cmp(b.1)).map(|(x, _)| x.clone()).expect("non-empty");
        modal.push(best);
    }
    let weakly_increasing = epp_rho0.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let modal_at_full_weight = modal.last() == Some(&rho0);
    Ok(IdeaReport { n0, epp_rho0, modal, weakly_increasing, modal_at_full_weight })
}
