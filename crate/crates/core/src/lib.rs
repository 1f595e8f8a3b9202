#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Bayesian inference for the Mallows model with Spearman's distance.
//!
//! The crate covers the model itself ([`model`]), its partition functions
//! ([`partition`]), the conjugate prior for the consensus ranking and prior
//! elicitation ([`prior`]), exact and MCMC posterior computation
//! ([`inference`]), ranking/covariate file formats ([`dataset`]) and the
//! reproduction pipelines behind the `mallows reproduce` command
//! ([`reproduce`]).

pub mod dataset;
pub mod error;
pub mod inference;
pub mod model;
pub mod partition;
pub mod perm;
pub mod prior;
pub mod reproduce;

#[cfg(test)]
mod testutil;

pub use error::{ErrorClass, MallowsError, Result};
pub use perm::{PermutohedronPoint, Ranking, RankingSample};
