//! Posterior computation for `(ρ, θ)`: exact enumeration for small `n` and a
//! Metropolis-within-Gibbs sampler.

pub mod exact;
pub mod leap_shift;
pub mod mcmc;
pub mod stats;
pub mod summary;

pub use exact::{exact_posterior_fixed_theta, exact_posterior_joint, tv_distance, JointPosterior, RankingProbabilities};
pub use leap_shift::{leap_and_shift, transition_log_prob, Proposal};
pub use mcmc::{mh_step_rho, mh_step_theta, run_chains, run_mcmc, McmcConfig, McmcTrace, ThetaTarget};
pub use stats::{check_case, InferenceCase, SufficientStats, ThetaPrior};
pub use summary::{max_epp_discrepancy, summarize, summarize_pooled, write_trace_csv, EppEntry, RunReport, Summary};
