use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use mallows_core::dataset::{read_covariates_from, read_rankings_from, write_rankings};
use mallows_core::inference::{
    check_case, exact_posterior_fixed_theta, exact_posterior_joint, run_chains, write_trace_csv, EppEntry,
    InferenceCase, McmcConfig, RankingProbabilities, RunReport, ThetaPrior,
};
use mallows_core::model::{sample_exact, sample_mcmc, MmsParams, RngSeed};
use mallows_core::partition::{build_frequency_table_with_limit, N_ENUM_MAX};
use mallows_core::prior::{elicit_topk, EmmsPrior, Orientation};
use mallows_core::reproduce::{elicitation_report, idea_check, reproduce_sushi, reproduce_table1, Table1Config};
use mallows_core::{MallowsError, PermutohedronPoint, Ranking, RankingSample};

use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::tables::{cache_dir, cache_path, table_for};

#[derive(Args, Debug)]
pub struct ZtableArgs {
    /// Number of items.
    pub n: usize,
    /// Output file; defaults to the MALLOWS_TABLE_DIR cache, else standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Enumerate beyond the default limit of 10 items (slow).
    #[arg(long)]
    pub allow_long: bool,
}

pub fn ztable(run: &mut Run, args: &ZtableArgs) -> CliResult<()> {
    if args.n > N_ENUM_MAX && !args.allow_long {
        return Err(CliError::Usage(format!(
            "n = {} exceeds the enumeration limit {N_ENUM_MAX}; pass --allow-long to enumerate anyway",
            args.n
        )));
    }
    run.echo("n", &args.n)?;
    run.echo("allow_long", &args.allow_long)?;
    let table = build_frequency_table_with_limit(args.n, args.n.max(N_ENUM_MAX))?;
    let out = args.out.clone().or_else(|| cache_dir().map(|d| cache_path(&d, args.n)));
    if let Some(dir) = out.as_deref().and_then(Path::parent).filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| crate::manifest::file_err(dir, source))?;
    }
    run.emit(out.as_deref(), table.to_text().as_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMethod {
    /// Exact sampling when n is small enough to enumerate, MCMC otherwise.
    Auto,
    Exact,
    Mcmc,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Consensus ranking, e.g. 2,1,4,3.
    #[arg(long)]
    pub rho: Ranking,
    #[arg(long)]
    pub theta: f64,
    /// Number of assessors to draw.
    #[arg(long, short = 'N')]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SimulationMethod::Auto)]
    pub method: SimulationMethod,
    /// MCMC only.
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// MCMC only.
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    /// MCMC only.
    #[arg(long, default_value_t = 1)]
    pub leap: usize,
    /// Frequency table file (exact sampling).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Rankings CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn simulate(run: &mut Run, args: &SimulateArgs) -> CliResult<()> {
    let params = MmsParams::new(args.rho.clone(), args.theta)?;
    let n = params.n();
    let method = match args.method {
        SimulationMethod::Auto if n <= N_ENUM_MAX || args.table.is_some() => SimulationMethod::Exact,
        SimulationMethod::Auto => SimulationMethod::Mcmc,
        m => m,
    };
    run.seed = Some(args.seed);
    run.echo("rho", &params.rho)?;
    run.echo("theta", &params.theta)?;
    run.echo("count", &args.count)?;
    run.echo("method", &method)?;
    let seed = RngSeed(args.seed);
    let sample = if method == SimulationMethod::Exact {
        let table = table_for(run, n, args.table.as_deref())?;
        sample_exact(&params, args.count, &table, seed)?
    } else {
        run.echo("burn_in", &args.burn_in)?;
        run.echo("thin", &args.thin)?;
        run.echo("leap", &args.leap)?;
        sample_mcmc(&params, args.count, args.burn_in, args.thin, args.leap, seed)?
    };
    let mut buf = Vec::new();
    write_rankings(&sample, &mut buf)?;
    run.emit(args.out.as_deref(), &buf)
}

#[derive(Args, Debug, Clone)]
pub struct McmcArgs {
    /// Total iterations per chain, burn-in included.
    #[arg(long, default_value_t = 55_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Leap size of the Leap-and-Shift proposal.
    #[arg(long, default_value_t = 1)]
    pub leap: usize,
    /// Initial log-scale sd of the theta proposal.
    #[arg(long, default_value_t = 0.3)]
    pub theta_sd: f64,
    /// Keep the theta proposal sd fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Initial upper end of the theta range covered by the Z* grid.
    #[arg(long, default_value_t = 1.0)]
    pub theta_max: f64,
    #[arg(long, default_value_t = 256)]
    pub zstar_nodes: usize,
    /// Independent chains run in parallel.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
}

impl McmcArgs {
    fn config(&self, case: InferenceCase, fixed_theta: Option<f64>) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            leap_size: self.leap,
            theta_proposal_sd: self.theta_sd,
            adapt_during_burnin: !self.no_adapt,
            seed: RngSeed(self.seed),
            case,
            fixed_theta,
            theta_max: self.theta_max,
            zstar_nodes: self.zstar_nodes,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Rankings CSV.
    pub data: PathBuf,
    /// Prior mode: a ranking (2,1,3,4), a point of the permutohedron
    /// (1.5,1.5,3,4) or a top-k list (topk:1=B,2=A or topk:1=2,2=1).
    #[arg(long)]
    pub rho0: Option<String>,
    /// Prior sample size, eta0 = theta * N0.
    #[arg(long, conflicts_with = "eta0")]
    pub n0: Option<f64>,
    /// Fixed prior precision.
    #[arg(long)]
    pub eta0: Option<f64>,
    /// jeffreys, exp:<rate>, flat:<upper> or zstar.
    #[arg(long)]
    pub theta_prior: Option<ThetaPrior>,
    /// a (fixed eta0), b (eta0 = theta N0) or c (b with the Z*-proportional theta prior).
    #[arg(long)]
    pub case: Option<InferenceCase>,
    /// Hold theta at this value.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Exact posterior by enumeration instead of MCMC.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Frequency table file.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Summary JSON; standard output when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Trace CSV (MCMC only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

fn item_index(token: &str, n: usize) -> CliResult<usize> {
    let t = token.trim();
    let idx = match t.parse::<usize>() {
        Ok(i) if i >= 1 => i - 1,
        Ok(_) => return Err(CliError::Usage("items are numbered from 1".into())),
        Err(_) => match t.as_bytes() {
            [c] if c.is_ascii_uppercase() => (c - b'A') as usize,
            _ => return Err(CliError::Usage(format!("cannot read item {t:?}; use a 1-based index or a letter"))),
        },
    };
    if idx >= n {
        return Err(CliError::Usage(format!("item {t} is outside the {n} items")));
    }
    Ok(idx)
}

/// Parses the `--rho0` argument for `n` items.
pub fn parse_rho0(text: &str, n: usize) -> CliResult<PermutohedronPoint> {
    if let Some(list) = text.trim().strip_prefix("topk:") {
        let mut top = Vec::new();
        for pair in list.split(',').filter(|p| !p.trim().is_empty()) {
            let (rank, item) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected <rank>=<item> in top-k list, found {pair:?}")))?;
            let rank: u32 = rank.trim().parse().map_err(|_| CliError::Usage(format!("bad rank {rank:?}")))?;
            top.push((item_index(item, n)?, rank));
        }
        return Ok(elicit_topk(n, &top)?);
    }
    let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
    let coords = inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse {t:?} in --rho0"))))
        .collect::<CliResult<Vec<f64>>>()?;
    if coords.len() != n {
        return Err(MallowsError::LengthMismatch { expected: n, found: coords.len() }.into());
    }
    Ok(PermutohedronPoint::new(coords)?)
}

/// Prior, case and theta prior implied by the fit flags.
pub fn resolve_prior(args: &FitArgs, n: usize) -> CliResult<(EmmsPrior, InferenceCase, ThetaPrior)> {
    let prior = match (&args.rho0, args.n0, args.eta0) {
        (Some(r), Some(n0), None) => EmmsPrior::linked(parse_rho0(r, n)?, n0)?,
        (Some(r), None, Some(eta0)) => EmmsPrior::fixed(parse_rho0(r, n)?, eta0)?,
        (Some(_), None, None) => return Err(CliError::Usage("--rho0 needs a precision: --n0 or --eta0".into())),
        (None, Some(_), _) | (None, _, Some(_)) => {
            return Err(CliError::Usage("--n0 and --eta0 need a prior mode --rho0".into()))
        }
        (Some(_), Some(_), Some(_)) => return Err(CliError::Usage("--n0 and --eta0 are mutually exclusive".into())),
        // uniform prior, written in whichever precision form the case expects
        (None, None, None) if args.case == Some(InferenceCase::A) => EmmsPrior::uniform(n),
        (None, None, None) => EmmsPrior::linked(PermutohedronPoint::barycenter(n), 0.0)?,
    };
    let case = args.case.unwrap_or(if args.theta_prior == Some(ThetaPrior::ZstarProportional) {
        InferenceCase::C
    } else if prior.is_linked() {
        InferenceCase::B
    } else {
        InferenceCase::A
    });
    let theta_prior = args.theta_prior.unwrap_or(if case == InferenceCase::C {
        ThetaPrior::ZstarProportional
    } else {
        ThetaPrior::Jeffreys
    });
    check_case(&prior, &theta_prior, case)?;
    Ok((prior, case, theta_prior))
}

fn epp_entries(p: &RankingProbabilities) -> Vec<EppEntry> {
    p.iter().map(|(r, &probability)| EppEntry { ranking: r.clone(), probability }).collect()
}

#[derive(Debug, Serialize)]
pub struct ExactFit {
    pub case: InferenceCase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_prior: Option<ThetaPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_theta: Option<f64>,
    pub epp: Vec<EppEntry>,
    pub map_ranking: Ranking,
    pub map_tied: bool,
    pub theta_mean: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitOutput {
    Mcmc {
        prior: EmmsPrior,
        #[serde(flatten)]
        report: Box<RunReport>,
    },
    Exact {
        prior: EmmsPrior,
        #[serde(flatten)]
        result: ExactFit,
    },
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(MallowsError::Numerical(e.to_string())))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn read_sample(run: &mut Run, path: &Path) -> CliResult<RankingSample> {
    let bytes = run.read_input(path)?;
    Ok(read_rankings_from(bytes.as_slice(), &path.display().to_string())?)
}

pub fn fit(run: &mut Run, args: &FitArgs) -> CliResult<()> {
    let s = read_sample(run, &args.data)?;
    let n = s.n_items();
    let (prior, case, theta_prior) = resolve_prior(args, n)?;
    if args.exact && args.trace.is_some() {
        return Err(CliError::Usage("--trace has no meaning with --exact".into()));
    }
    if args.exact && args.mcmc.chains != 1 {
        return Err(CliError::Usage("--chains has no meaning with --exact".into()));
    }
    run.echo("prior", &prior)?;
    run.echo("case", &case)?;
    if let Some(t) = args.theta {
        run.echo("theta", &t)?;
    } else {
        run.echo("theta_prior", &theta_prior)?;
    }
    let output = if args.exact {
        run.echo("method", "exact")?;
        let result = match args.theta {
            Some(theta) => {
                let p = exact_posterior_fixed_theta(&s, theta, &prior)?;
                exact_fit(&p, case, None, Some(theta), theta)
            }
            None => {
                let table = table_for(run, n, args.table.as_deref())?;
                let j = exact_posterior_joint(&s, &prior, &theta_prior, case, &table, None)?;
                exact_fit(&j.probabilities, case, Some(theta_prior), None, j.theta_mean)
            }
        };
        FitOutput::Exact { prior, result }
    } else {
        let config = args.mcmc.config(case, args.theta);
        config.validate(n)?;
        run.seed = Some(args.mcmc.seed);
        run.echo("method", "mcmc")?;
        run.echo("mcmc", &config)?;
        run.echo("chains", &args.mcmc.chains)?;
        let table = if args.theta.is_none() { Some(table_for(run, n, args.table.as_deref())?) } else { None };
        let traces = run_chains(&s, &prior, &theta_prior, &config, table.as_ref(), args.mcmc.chains)?;
        let output = FitOutput::Mcmc { prior, report: Box::new(RunReport::from_traces(&traces)?) };
        run.emit(args.summary.as_deref(), &to_json(&output)?)?;
        if let Some(path) = &args.trace {
            let mut buf = Vec::new();
            write_trace_csv(&traces, &mut buf)?;
            run.emit(Some(path), &buf)?;
        }
        return Ok(());
    };
    run.emit(args.summary.as_deref(), &to_json(&output)?)
}

fn exact_fit(
    p: &RankingProbabilities,
    case: InferenceCase,
    theta_prior: Option<ThetaPrior>,
    fixed_theta: Option<f64>,
    theta_mean: f64,
) -> ExactFit {
    let top = p.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut winners = p.iter().filter(|(_, &v)| v == top).map(|(r, _)| r.clone());
    let map_ranking = winners.next().expect("non-empty posterior");
    ExactFit {
        case,
        theta_prior,
        fixed_theta,
        epp: epp_entries(p),
        map_ranking,
        map_tied: winners.next().is_some(),
        theta_mean,
    }
}

#[derive(Args, Debug)]
pub struct ElicitArgs {
    /// Covariates CSV: item,<covariate>,...
    pub covariates: PathBuf,
    /// Preference direction per covariate, e.g. --orient oil=lower; default higher.
    #[arg(long = "orient", value_name = "NAME=higher|lower")]
    pub orient: Vec<String>,
    /// Report JSON; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plain-text rank table instead of JSON.
    #[arg(long)]
    pub text: bool,
}

pub fn elicit(run: &mut Run, args: &ElicitArgs) -> CliResult<()> {
    let bytes = run.read_input(&args.covariates)?;
    let table = read_covariates_from(bytes.as_slice(), &args.covariates.display().to_string())?;
    let mut orientations = vec![Orientation::default(); table.covariates.len()];
    for spec in &args.orient {
        let (name, dir) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected NAME=higher|lower, found {spec:?}")))?;
        let j = table
            .covariates
            .iter()
            .position(|c| c == name.trim())
            .ok_or_else(|| CliError::Usage(format!("no covariate named {name:?}")))?;
        orientations[j] = dir.trim().parse()?;
    }
    let named: Vec<(String, Orientation)> = table.covariates.iter().cloned().zip(orientations.iter().copied()).collect();
    run.echo("orientations", &named)?;
    let report = elicitation_report(&table, &orientations)?;
    for w in &report.elicitation.warnings {
        log::warn!("{w}");
    }
    let content = if args.text { report.to_text().into_bytes() } else { to_json(&report)? };
    run.emit(args.out.as_deref(), &content)
}

#[derive(Subcommand, Debug)]
pub enum ReproduceCommand {
    /// Simulation study: posterior of the consensus for six prior sample sizes.
    Table1(Table1Args),
    /// Covariate rank vectors and prior modes for the sushi items.
    Sushi(ReportArgs),
    /// Prior-weight check on a user-supplied `idea` rankings file (5 items).
    Idea(IdeaArgs),
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Text output; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Table1Args {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// MCMC seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the simulated sample.
    #[arg(long)]
    pub sample_seed: Option<u64>,
    #[arg(long)]
    pub theta_prior: Option<ThetaPrior>,
    /// b or c.
    #[arg(long)]
    pub case: Option<InferenceCase>,
    #[command(flatten)]
    pub report: ReportArgs,
}

pub fn table1(run: &mut Run, args: &Table1Args) -> CliResult<()> {
    let mut config = Table1Config::default();
    if let Some(v) = args.iterations {
        config.mcmc.iterations = v;
    }
    if let Some(v) = args.burn_in {
        config.mcmc.burn_in = v;
    }
    if let Some(v) = args.seed {
        config.mcmc.seed = RngSeed(v);
    }
    if let Some(v) = args.sample_seed {
        config.sample_seed = RngSeed(v);
    }
    if let Some(c) = args.case {
        config.mcmc.case = c;
        if c == InferenceCase::C {
            config.theta_prior = ThetaPrior::ZstarProportional;
        }
    }
    if let Some(p) = args.theta_prior {
        config.theta_prior = p;
    }
    if config.mcmc.case == InferenceCase::A {
        return Err(CliError::Usage("the simulation study uses a theta-linked prior: case b or c".into()));
    }
    config.mcmc.validate(4)?;
    run.seed = Some(config.mcmc.seed.0);
    run.echo("table1", &config)?;
    let table = table_for(run, 4, None)?;
    let report = reproduce_table1(&config, &table)?;
    run.emit(args.report.out.as_deref(), report.to_text().as_bytes())?;
    if let Some(path) = &args.report.json {
        run.emit(Some(path), &to_json(&report)?)?;
    }
    Ok(())
}

pub fn sushi(run: &mut Run, args: &ReportArgs) -> CliResult<()> {
    let report = reproduce_sushi()?;
    run.emit(args.out.as_deref(), report.to_text().as_bytes())?;
    if let Some(path) = &args.json {
        run.emit(Some(path), &to_json(&report)?)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct IdeaArgs {
    /// Rankings CSV with 5 items: thought, play, theory, dream, attention.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON report; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn idea(run: &mut Run, args: &IdeaArgs) -> CliResult<()> {
    let s = read_sample(run, &args.data)?;
    let table = table_for(run, s.n_items(), None)?;
    let report = idea_check(&s, &table)?;
    if !report.weakly_increasing || !report.modal_at_full_weight {
        log::warn!("prior-weight pattern not observed: {report:?}");
    }
    run.emit(args.out.as_deref(), &to_json(&report)?)
}
