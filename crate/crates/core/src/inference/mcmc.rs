//! Metropolis-within-Gibbs sampler for `(ρ, θ)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::theta_log_weight;
use super::leap_shift::{check_leap, leap_and_shift};
use super::stats::{check_case, InferenceCase, SufficientStats, ThetaPrior};
use crate::error::{MallowsError, Result};
use crate::model::{mle_rho, mle_theta, RngSeed};
use crate::partition::{DistanceFrequencyTable, DistanceProfile, ZStarGrid, ZSTAR_GRID_NODES};
use crate::perm::{Ranking, RankingSample};
use crate::prior::EmmsPrior;

const ADAPT_WINDOW: usize = 100;
const ADAPT_FACTOR: f64 = 1.1;
const ADAPT_TARGET: (f64, f64) = (0.25, 0.45);
const FALLBACK_THETA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub leap_size: usize,
    /// Log-scale standard deviation of the `θ` proposal.
    pub theta_proposal_sd: f64,
    pub adapt_during_burnin: bool,
    pub seed: RngSeed,
    pub case: InferenceCase,
    /// Skip the `θ` steps and hold `θ` at this value.
    pub fixed_theta: Option<f64>,
    /// Initial `Z*` grid covers `η₀ ∈ [0, theta_max · N₀]`.
    pub theta_max: f64,
    pub zstar_nodes: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 55_000,
            burn_in: 5_000,
            thin: 1,
            leap_size: 1,
            theta_proposal_sd: 0.3,
            adapt_during_burnin: true,
            seed: RngSeed(1),
            case: InferenceCase::B,
            fixed_theta: None,
            theta_max: 1.0,
            zstar_nodes: ZSTAR_GRID_NODES,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(MallowsError::InvalidParameter(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(MallowsError::InvalidParameter("thin must be positive".into()));
        }
        if n >= 2 {
            check_leap(n, self.leap_size)?;
        }
        if !(self.theta_proposal_sd > 0.0) || !self.theta_proposal_sd.is_finite() {
            return Err(MallowsError::InvalidParameter("theta proposal sd must be positive".into()));
        }
        if !(self.theta_max > 0.0) || self.zstar_nodes < 2 {
            return Err(MallowsError::InvalidParameter("theta_max must be positive and the Z* grid needs 2 nodes".into()));
        }
        if let Some(t) = self.fixed_theta {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(MallowsError::InvalidParameter(format!("fixed theta must be finite and >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Full conditional of `θ` up to a constant, with the `Z*` interpolation grid
/// for case b built on first use and widened when `θ N₀` leaves it.
#[derive(Debug, Clone)]
pub struct ThetaTarget<'a> {
    case: InferenceCase,
    theta_prior: ThetaPrior,
    table: &'a DistanceFrequencyTable,
    count: usize,
    n0: f64,
    profile: Option<DistanceProfile>,
    grid: Option<ZStarGrid>,
    theta_max: f64,
    nodes: usize,
}

impl<'a> ThetaTarget<'a> {
    pub fn new(
        stats: &SufficientStats,
        theta_prior: ThetaPrior,
        case: InferenceCase,
        table: &'a DistanceFrequencyTable,
        theta_max: f64,
        nodes: usize,
    ) -> Result<Self> {
        if table.n() != stats.n_items() {
            return Err(MallowsError::LengthMismatch { expected: stats.n_items(), found: table.n() });
        }
        let n0 = stats.n0();
        let profile = if case == InferenceCase::B && n0 > 0.0 { Some(DistanceProfile::new(stats.rho0())?) } else { None };
        Ok(Self { case, theta_prior, table, count: stats.count(), n0, profile, grid: None, theta_max, nodes })
    }

    pub fn grid(&self) -> Option<&ZStarGrid> {
        self.grid.as_ref()
    }

    fn log_zstar(&mut self, theta: f64) -> Result<f64> {
        let Some(profile) = &self.profile else {
            // N₀ = 0: Z* is the constant n!
            return Ok(0.0);
        };
        let eta = theta * self.n0;
        if !self.grid.as_ref().is_some_and(|g| g.covers(eta)) {
            // widening keeps the node spacing of the initial grid
            let initial = self.theta_max * self.n0;
            let spacing = initial / (self.nodes - 1) as f64;
            let mut hi = self.grid.as_ref().map_or(initial, |g| g.range().1);
            while hi < eta {
                hi *= 2.0;
            }
            let nodes = (hi / spacing).round() as usize + 1;
            log::debug!("building Z* grid on [0, {hi}] with {nodes} nodes");
            self.grid = Some(ZStarGrid::uniform(profile, hi, nodes)?);
        }
        self.grid.as_ref().expect("grid").interpolate(eta)
    }

    /// `log π(θ | ρ, data)` up to a constant, given `D(ρ)` and `D*(ρ)`.
    pub fn log_density(&mut self, theta: f64, data_distance: f64, prior_distance: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let (case, theta_prior, table, count) = (self.case, self.theta_prior, self.table, self.count);
        let w = theta_log_weight(theta, count, case, &theta_prior, table, |t| self.log_zstar(t))?;
        if w == f64::NEG_INFINITY {
            return Ok(w);
        }
        let prior_term = match case {
            InferenceCase::A => 0.0,
            InferenceCase::B | InferenceCase::C => theta * self.n0 * prior_distance,
        };
        Ok(w - theta * data_distance - prior_term)
    }
}

/// One Metropolis update of `ρ` at fixed `θ`; returns the new state and
/// whether the proposal was accepted.
pub fn mh_step_rho<R: Rng + ?Sized>(
    current: &Ranking,
    theta: f64,
    stats: &SufficientStats,
    leap: usize,
    rng: &mut R,
) -> Result<(Ranking, bool)> {
    let field = stats.rho_field(theta);
    let prop = leap_and_shift(current, leap, rng)?;
    let delta: f64 = prop
        .rho
        .ranks()
        .iter()
        .zip(current.ranks())
        .zip(&field)
        .map(|((&a, &b), w)| (a as f64 - b as f64) * w)
        .sum();
    let log_a = 2.0 * delta + prop.log_bwd - prop.log_fwd;
    if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
        Ok((prop.rho, true))
    } else {
        Ok((current.clone(), false))
    }
}

/// One Metropolis update of `θ` with a log-normal proposal centred on the
/// current value.
pub fn mh_step_theta<R: Rng + ?Sized>(
    current: f64,
    rho: &Ranking,
    stats: &SufficientStats,
    target: &mut ThetaTarget<'_>,
    proposal_sd: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    if !(current > 0.0) {
        return Err(MallowsError::InvalidParameter(format!("current theta must be positive, got {current}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    let proposed = current * (proposal_sd * z).exp();
    let (d, ds) = (stats.data_distance(rho) as f64, stats.prior_distance(rho));
    let new = target.log_density(proposed, d, ds)?;
    if new == f64::NEG_INFINITY {
        return Ok((current, false));
    }
    let old = target.log_density(current, d, ds)?;
    let log_a = new - old + (proposed / current).ln();
    if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
        Ok((proposed, true))
    } else {
        Ok((current, false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcTrace {
    /// 1-based iteration index of every kept state.
    pub iterations: Vec<usize>,
    pub rho_states: Vec<Ranking>,
    pub theta_states: Vec<f64>,
    /// Acceptance rates over the post-burn-in iterations.
    pub accept_rho: f64,
    pub accept_theta: Option<f64>,
    /// `θ` proposal sd after burn-in adaptation.
    pub theta_proposal_sd: f64,
    pub config: McmcConfig,
    pub theta_prior: Option<ThetaPrior>,
}

impl McmcTrace {
    pub fn len(&self) -> usize {
        self.rho_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_states.is_empty()
    }
}

fn initial_state<R: Rng + ?Sized>(
    s: &RankingSample,
    config: &McmcConfig,
    table: Option<&DistanceFrequencyTable>,
    theta_prior: &ThetaPrior,
    rng: &mut R,
) -> (Ranking, f64) {
    let n = s.n_items();
    let rho = match mle_rho(s) {
        Ok(r) => r,
        Err(_) => {
            let mut v: Vec<u32> = (1..=n as u32).collect();
            v.shuffle(rng);
            Ranking::new(v).expect("permutation")
        }
    };
    let theta = match config.fixed_theta {
        Some(t) => t,
        None => {
            let mle = table.and_then(|t| mle_theta(s, &rho, t).ok()).map(|m| m.theta).filter(|&t| t > 0.0);
            let t = mle.unwrap_or(FALLBACK_THETA);
            match theta_prior.upper() {
                Some(u) if t >= u => 0.5 * u,
                _ => t,
            }
        }
    };
    (rho, theta)
}

/// Runs one chain. `table` is needed unless `config.fixed_theta` is set.
pub fn run_mcmc(
    s: &RankingSample,
    prior: &EmmsPrior,
    theta_prior: &ThetaPrior,
    config: &McmcConfig,
    table: Option<&DistanceFrequencyTable>,
) -> Result<McmcTrace> {
    let n = prior.n();
    config.validate(n)?;
    let stats = SufficientStats::new(s, prior)?;
    let mut target = match config.fixed_theta {
        Some(_) => None,
        None => {
            check_case(prior, theta_prior, config.case)?;
            let table = table.ok_or_else(|| {
                MallowsError::InconsistentConfig("sampling theta needs a distance frequency table".into())
            })?;
            Some(ThetaTarget::new(&stats, *theta_prior, config.case, table, config.theta_max, config.zstar_nodes)?)
        }
    };

    let mut rng = config.seed.rng();
    let (mut rho, mut theta) = initial_state(s, config, table, theta_prior, &mut rng);
    let mut sd = config.theta_proposal_sd;
    let kept = (config.iterations - config.burn_in).div_ceil(config.thin);
    let mut trace = McmcTrace {
        iterations: Vec::with_capacity(kept),
        rho_states: Vec::with_capacity(kept),
        theta_states: Vec::with_capacity(kept),
        accept_rho: 0.0,
        accept_theta: None,
        theta_proposal_sd: sd,
        config: config.clone(),
        theta_prior: config.fixed_theta.is_none().then_some(*theta_prior),
    };
    let (mut acc_rho, mut acc_theta, mut window_acc) = (0usize, 0usize, 0usize);

    for t in 0..config.iterations {
        let mut rho_moved = false;
        if n >= 2 {
            let (next, moved) = mh_step_rho(&rho, theta, &stats, config.leap_size, &mut rng)?;
            rho = next;
            rho_moved = moved;
        }
        let mut theta_moved = false;
        if let Some(target) = target.as_mut() {
            let (next, moved) = mh_step_theta(theta, &rho, &stats, target, sd, &mut rng)?;
            theta = next;
            theta_moved = moved;
        }

        if t < config.burn_in {
            if config.adapt_during_burnin && target.is_some() {
                window_acc += theta_moved as usize;
                if (t + 1) % ADAPT_WINDOW == 0 {
                    let rate = window_acc as f64 / ADAPT_WINDOW as f64;
                    if rate < ADAPT_TARGET.0 {
                        sd /= ADAPT_FACTOR;
                    } else if rate > ADAPT_TARGET.1 {
                        sd *= ADAPT_FACTOR;
                    }
                    window_acc = 0;
                }
            }
            continue;
        }
        acc_rho += rho_moved as usize;
        acc_theta += theta_moved as usize;
        if (t - config.burn_in).is_multiple_of(config.thin) {
            trace.iterations.push(t + 1);
            trace.rho_states.push(rho.clone());
            trace.theta_states.push(theta);
        }
    }
    let post = (config.iterations - config.burn_in) as f64;
    trace.accept_rho = acc_rho as f64 / post;
    trace.accept_theta = target.is_some().then(|| acc_theta as f64 / post);
    trace.theta_proposal_sd = sd;
    Ok(trace)
}

/// Runs `chains` independent chains in parallel; chain `k` is seeded with
/// `config.seed.stream(k)`.
pub fn run_chains(
    s: &RankingSample,
    prior: &EmmsPrior,
    theta_prior: &ThetaPrior,
    config: &McmcConfig,
    table: Option<&DistanceFrequencyTable>,
    chains: usize,
) -> Result<Vec<McmcTrace>> {
    if chains == 0 {
        return Err(MallowsError::InvalidParameter("at least one chain is needed".into()));
    }
    (0..chains as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = McmcConfig { seed: config.seed.stream(k), ..config.clone() };
            run_mcmc(s, prior, theta_prior, &cfg, table)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::exact::{exact_posterior_fixed_theta, exact_posterior_joint, tv_distance};
    use crate::inference::summary::summarize;
    use crate::partition::build_frequency_table;
    use crate::perm::{all_rankings, PermutohedronPoint};
    use crate::testutil::{r, table1_like_sample};

    fn rho0() -> PermutohedronPoint {
        PermutohedronPoint::from(&r(&[2, 1, 3, 4]))
    }

    fn short(seed: u64) -> McmcConfig {
        McmcConfig { iterations: 25_000, burn_in: 5_000, seed: RngSeed(seed), ..Default::default() }
    }

    #[test]
    fn config_validation() {
        let s = table1_like_sample();
        let prior = EmmsPrior::linked(rho0(), 5.0).unwrap();
        let table = build_frequency_table(4).unwrap();
        let run = |cfg: McmcConfig| run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table));
        assert!(run(McmcConfig { burn_in: 10, iterations: 10, ..short(1) }).is_err());
        assert!(run(McmcConfig { thin: 0, ..short(1) }).is_err());
        assert!(run(McmcConfig { leap_size: 4, ..short(1) }).is_err());
        assert!(run(McmcConfig { theta_proposal_sd: 0.0, ..short(1) }).is_err());
        assert!(matches!(
            run(McmcConfig { case: InferenceCase::A, ..short(1) }),
            Err(MallowsError::InconsistentConfig(_))
        ));
        assert!(matches!(
            run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &short(1), None),
            Err(MallowsError::InconsistentConfig(_))
        ));
    }

    #[test]
    fn trace_length_and_determinism() {
        let s = table1_like_sample();
        let prior = EmmsPrior::linked(rho0(), 5.0).unwrap();
        let table = build_frequency_table(4).unwrap();
        let cfg = McmcConfig { iterations: 101, burn_in: 100, ..short(3) };
        let t = run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.iterations, vec![101]);

        let cfg = McmcConfig { iterations: 3_000, burn_in: 1_000, thin: 7, ..short(9) };
        let a = run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table)).unwrap();
        let b = run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2_000usize.div_ceil(7));
        assert!(a.theta_states.iter().all(|&t| t > 0.0));
        assert!((0.0..=1.0).contains(&a.accept_rho));
        assert!((0.0..=1.0).contains(&a.accept_theta.unwrap()));
    }

    #[test]
    fn rho_step_uniform_without_information() {
        // θ = 0 and no prior weight: only the proposal asymmetry matters
        let s = RankingSample::with_items(4, vec![]).unwrap();
        let prior = EmmsPrior::fixed(rho0(), 0.0).unwrap();
        let cfg = McmcConfig { iterations: 250_000, burn_in: 10_000, leap_size: 2, fixed_theta: Some(0.0), ..short(5) };
        let t = run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, None).unwrap();
        let summary = summarize(&t).unwrap();
        let expect = t.len() as f64 / 24.0;
        let chi2: f64 = all_rankings(4)
            .map(|x| {
                let o = summary.epp_of(&x) * t.len() as f64;
                (o - expect).powi(2) / expect
            })
            .sum();
        // strongly autocorrelated draws, so a loose bound on 23 degrees of freedom
        assert!(chi2 < 200.0, "chi2 = {chi2}");
        assert!(summary.epp.iter().all(|e| (e.probability - 1.0 / 24.0).abs() < 0.01));
    }

    #[test]
    fn fixed_theta_chain_matches_oracle() {
        let s = table1_like_sample();
        for (n0, seed) in [(0.0, 11), (15.0, 12), (20.0, 13)] {
            let prior = EmmsPrior::linked(rho0(), n0).unwrap();
            let cfg = McmcConfig { iterations: 55_000, fixed_theta: Some(0.065), ..short(seed) };
            let t = run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, None).unwrap();
            assert_eq!(t.accept_theta, None);
            let exact = exact_posterior_fixed_theta(&s, 0.065, &prior).unwrap();
            let summary = summarize(&t).unwrap();
            for (x, p) in &exact {
                assert!((summary.epp_of(x) - p).abs() < 0.01, "N0 = {n0}: {x}");
            }
        }
    }

    #[test]
    fn joint_chain_matches_oracle() {
        let s = table1_like_sample();
        let table = build_frequency_table(4).unwrap();
        let prior = EmmsPrior::linked(rho0(), 10.0).unwrap();
        let cfg = McmcConfig { iterations: 55_000, ..short(21) };
        let t = run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table)).unwrap();
        let exact = exact_posterior_joint(&s, &prior, &ThetaPrior::Jeffreys, InferenceCase::B, &table, None).unwrap();
        let summary = summarize(&t).unwrap();
        assert!(tv_distance(&summary.epp_map(), &exact.probabilities) < 0.02);
        assert!((summary.theta_mean - exact.theta_mean).abs() < 0.005);
        let acc = t.accept_theta.unwrap();
        assert!(acc > 0.15 && acc < 0.6, "theta acceptance {acc}");
    }

    #[test]
    fn case_c_kernel_identity() {
        let s = table1_like_sample();
        let table = build_frequency_table(4).unwrap();
        let prior = EmmsPrior::linked(rho0(), 5.0).unwrap();
        let zp = ThetaPrior::ZstarProportional;
        let cfg = McmcConfig { iterations: 105_000, ..short(31) };
        let b = run_mcmc(&s, &prior, &zp, &cfg, Some(&table)).unwrap();
        let c = run_mcmc(&s, &prior, &zp, &McmcConfig { case: InferenceCase::C, ..cfg }, Some(&table)).unwrap();
        let (sb, sc) = (summarize(&b).unwrap(), summarize(&c).unwrap());
        let exact = exact_posterior_joint(&s, &prior, &zp, InferenceCase::C, &table, None).unwrap();
        for x in all_rankings(4) {
            assert!((sb.epp_of(&x) - sc.epp_of(&x)).abs() < 0.01, "{x}");
        }
        assert!(tv_distance(&sc.epp_map(), &exact.probabilities) < 0.02);
    }

    #[test]
    fn tiny_proposal_is_almost_always_accepted() {
        let s = table1_like_sample();
        let table = build_frequency_table(4).unwrap();
        let prior = EmmsPrior::linked(rho0(), 5.0).unwrap();
        let stats = SufficientStats::new(&s, &prior).unwrap();
        let mut target = ThetaTarget::new(&stats, ThetaPrior::Jeffreys, InferenceCase::B, &table, 1.0, 256).unwrap();
        let mut rng = RngSeed(4).rng();
        let mut theta = 0.07;
        let mut accepted = 0;
        for _ in 0..2_000 {
            let (t, a) = mh_step_theta(theta, &r(&[2, 1, 4, 3]), &stats, &mut target, 1e-6, &mut rng).unwrap();
            theta = t;
            accepted += a as usize;
        }
        assert!(accepted >= 1_990);
    }

    #[test]
    fn zstar_grid_is_widened_on_excursion() {
        let s = table1_like_sample();
        let table = build_frequency_table(4).unwrap();
        let prior = EmmsPrior::linked(rho0(), 5.0).unwrap();
        let stats = SufficientStats::new(&s, &prior).unwrap();
        let mut target = ThetaTarget::new(&stats, ThetaPrior::Jeffreys, InferenceCase::B, &table, 0.1, 64).unwrap();
        target.log_density(0.05, 220.0, 2.0).unwrap();
        assert_eq!(target.grid().unwrap().range().1, 0.5);
        target.log_density(0.3, 220.0, 2.0).unwrap();
        let grid = target.grid().unwrap();
        assert!(grid.covers(1.5));
        assert_eq!(grid.eta_grid().len(), 4 * 63 + 1);
    }

    #[test]
    fn flat_prior_support_rejects() {
        let s = table1_like_sample();
        let table = build_frequency_table(4).unwrap();
        let prior = EmmsPrior::fixed(rho0(), 0.5).unwrap();
        let cfg = McmcConfig { case: InferenceCase::A, iterations: 6_000, burn_in: 1_000, ..short(8) };
        let t = run_mcmc(&s, &prior, &ThetaPrior::Flat { upper: 0.07 }, &cfg, Some(&table)).unwrap();
        assert!(t.theta_states.iter().all(|&x| x > 0.0 && x <= 0.07));
    }

    #[test]
    fn chains_are_independent_and_reproducible() {
        let s = table1_like_sample();
        let table = build_frequency_table(4).unwrap();
        let prior = EmmsPrior::linked(rho0(), 5.0).unwrap();
        let cfg = McmcConfig { iterations: 4_000, burn_in: 1_000, ..short(2) };
        let a = run_chains(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table), 3).unwrap();
        let b = run_chains(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].theta_states, a[1].theta_states);
        assert_eq!(a[0], run_mcmc(&s, &prior, &ThetaPrior::Jeffreys, &cfg, Some(&table)).unwrap());
    }
}
