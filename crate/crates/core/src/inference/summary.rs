use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::exact::RankingProbabilities;
use super::mcmc::{McmcConfig, McmcTrace};
use super::stats::ThetaPrior;
use crate::error::{MallowsError, Result};
use crate::perm::Ranking;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EppEntry {
    pub ranking: Ranking,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Visited rankings in lexicographic order with their frequencies.
    pub epp: Vec<EppEntry>,
    pub map_ranking: Ranking,
    /// More than one ranking attains the maximal EPP; `map_ranking` is then
    /// the lexicographically smallest of them.
    pub map_tied: bool,
    pub theta_mean: f64,
    /// Central 95% interval of the `θ` draws.
    pub theta_ci: (f64, f64),
    pub states: usize,
}

impl Summary {
    pub fn epp_of(&self, rho: &Ranking) -> f64 {
        self.epp
            .binary_search_by(|e| e.ranking.cmp(rho))
            .map(|i| self.epp[i].probability)
            .unwrap_or(0.0)
    }

    pub fn epp_map(&self) -> RankingProbabilities {
        self.epp.iter().map(|e| (e.ranking.clone(), e.probability)).collect()
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize_states(rho: &[Ranking], theta: &[f64]) -> Result<Summary> {
    if rho.is_empty() || rho.len() != theta.len() {
        return Err(MallowsError::EmptyTrace);
    }
    let mut counts: BTreeMap<&Ranking, usize> = BTreeMap::new();
    for x in rho {
        *counts.entry(x).or_insert(0) += 1;
    }
    let total = rho.len() as f64;
    let top = *counts.values().max().expect("non-empty");
    let mut winners = counts.iter().filter(|(_, &c)| c == top).map(|(x, _)| *x);
    let map_ranking = winners.next().expect("non-empty").clone();
    let map_tied = winners.next().is_some();
    let epp = counts
        .into_iter()
        .map(|(x, c)| EppEntry { ranking: x.clone(), probability: c as f64 / total })
        .collect();
    let mut sorted = theta.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        epp,
        map_ranking,
        map_tied,
        theta_mean: theta.iter().sum::<f64>() / total,
        theta_ci: (quantile(&sorted, 0.025), quantile(&sorted, 0.975)),
        states: rho.len(),
    })
}

pub fn summarize(trace: &McmcTrace) -> Result<Summary> {
    summarize_states(&trace.rho_states, &trace.theta_states)
}

/// Summary of the pooled states of several chains.
pub fn summarize_pooled(traces: &[McmcTrace]) -> Result<Summary> {
    let rho: Vec<Ranking> = traces.iter().flat_map(|t| t.rho_states.iter().cloned()).collect();
    let theta: Vec<f64> = traces.iter().flat_map(|t| t.theta_states.iter().copied()).collect();
    summarize_states(&rho, &theta)
}

/// Largest spread of any ranking's EPP across chains.
pub fn max_epp_discrepancy(summaries: &[Summary]) -> f64 {
    let mut keys: Vec<&Ranking> = summaries.iter().flat_map(|s| s.epp.iter().map(|e| &e.ranking)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|x| {
            let v: Vec<f64> = summaries.iter().map(|s| s.epp_of(x)).collect();
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Writes `iteration,rho,theta` rows, ranks space-separated. Multiple chains
/// are concatenated with a leading `chain` column.
pub fn write_trace_csv<W: Write>(traces: &[McmcTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let multi = traces.len() > 1;
    let io = |e: csv::Error| MallowsError::Io(e.into());
    if multi {
        w.write_record(["chain", "iteration", "rho", "theta"]).map_err(io)?;
    } else {
        w.write_record(["iteration", "rho", "theta"]).map_err(io)?;
    }
    for (k, t) in traces.iter().enumerate() {
        for ((it, rho), theta) in t.iterations.iter().zip(&t.rho_states).zip(&t.theta_states) {
            let ranks = rho.ranks().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            let mut rec = Vec::with_capacity(4);
            if multi {
                rec.push(k.to_string());
            }
            rec.extend([it.to_string(), ranks, theta.to_string()]);
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything reported about an MCMC fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub summary: Summary,
    pub chains: usize,
    pub accept_rho: Vec<f64>,
    pub accept_theta: Vec<Option<f64>>,
    pub theta_proposal_sd: Vec<f64>,
    /// Only for several chains.
    pub max_epp_discrepancy: Option<f64>,
    pub theta_prior: Option<ThetaPrior>,
    pub config: McmcConfig,
    pub seed: u64,
}

impl RunReport {
    pub fn from_traces(traces: &[McmcTrace]) -> Result<Self> {
        let first = traces.first().ok_or(MallowsError::EmptyTrace)?;
        let summary = summarize_pooled(traces)?;
        let max_epp_discrepancy = if traces.len() > 1 {
            let per_chain = traces.iter().map(summarize).collect::<Result<Vec<_>>>()?;
            Some(max_epp_discrepancy(&per_chain))
        } else {
            None
        };
        Ok(Self {
            summary,
            chains: traces.len(),
            accept_rho: traces.iter().map(|t| t.accept_rho).collect(),
            accept_theta: traces.iter().map(|t| t.accept_theta).collect(),
            theta_proposal_sd: traces.iter().map(|t| t.theta_proposal_sd).collect(),
            max_epp_discrepancy,
            theta_prior: first.theta_prior,
            config: first.config.clone(),
            seed: first.config.seed.0,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| MallowsError::Io(e.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::mcmc::McmcConfig;
    use crate::perm::all_rankings;
    use crate::testutil::r;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trace_of(rho: Vec<Ranking>, theta: Vec<f64>) -> McmcTrace {
        McmcTrace {
            iterations: (1..=rho.len()).collect(),
            rho_states: rho,
            theta_states: theta,
            accept_rho: 0.5,
            accept_theta: Some(0.3),
            theta_proposal_sd: 0.3,
            config: McmcConfig::default(),
            theta_prior: Some(ThetaPrior::Jeffreys),
        }
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(summarize(&trace_of(vec![], vec![])), Err(MallowsError::EmptyTrace)));
    }

    #[test]
    fn constant_trace() {
        let t = trace_of(vec![r(&[2, 1, 3]); 10], vec![0.5; 10]);
        let s = summarize(&t).unwrap();
        assert_eq!(s.epp.len(), 1);
        assert_eq!(s.epp[0].probability, 1.0);
        assert_eq!(s.map_ranking, r(&[2, 1, 3]));
        assert!(!s.map_tied);
        assert_eq!(s.theta_ci, (0.5, 0.5));
    }

    #[test]
    fn uniform_trace_is_flat() {
        let all: Vec<Ranking> = all_rankings(3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho: Vec<Ranking> = (0..100_000).map(|_| all[rng.random_range(0..6)].clone()).collect();
        let s = summarize(&trace_of(rho, vec![1.0; 100_000])).unwrap();
        let max = s.epp.iter().map(|e| e.probability).fold(0.0, f64::max);
        let min = s.epp.iter().map(|e| e.probability).fold(1.0, f64::min);
        assert!(max - min < 0.02);
    }

    #[test]
    fn ties_and_interval() {
        let rho = vec![r(&[2, 1]), r(&[1, 2]), r(&[2, 1]), r(&[1, 2])];
        let theta: Vec<f64> = (0..4).map(|k| k as f64).collect();
        let s = summarize(&trace_of(rho, theta)).unwrap();
        assert_eq!(s.map_ranking, r(&[1, 2]));
        assert!(s.map_tied);
        assert_eq!(s.theta_mean, 1.5);
        assert!((s.theta_ci.0 - 0.075).abs() < 1e-12 && (s.theta_ci.1 - 2.925).abs() < 1e-12);
        assert_eq!(s.epp_of(&r(&[2, 1])), 0.5);
    }

    #[test]
    fn discrepancy_and_pooling() {
        let a = trace_of(vec![r(&[1, 2]); 4], vec![1.0; 4]);
        let b = trace_of(vec![r(&[1, 2]), r(&[2, 1]), r(&[2, 1]), r(&[2, 1])], vec![1.0; 4]);
        let sums = [summarize(&a).unwrap(), summarize(&b).unwrap()];
        assert_eq!(max_epp_discrepancy(&sums), 0.75);
        let pooled = summarize_pooled(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(pooled.epp_of(&r(&[1, 2])), 0.625);
        let report = RunReport::from_traces(&[a, b]).unwrap();
        assert_eq!(report.max_epp_discrepancy, Some(0.75));
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["summary"]["map_ranking"], serde_json::json!([1, 2]));
        assert_eq!(json["seed"], 1);
    }

    #[test]
    fn trace_csv_layout() {
        let t = trace_of(vec![r(&[2, 1, 3]), r(&[1, 2, 3])], vec![0.25, 0.5]);
        let mut buf = Vec::new();
        write_trace_csv(&[t], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,rho,theta\n1,2 1 3,0.25\n2,1 2 3,0.5\n");
    }
}
