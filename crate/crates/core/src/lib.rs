//! Bayesian changepoint detection with simultaneous spike-and-slab variable
//! selection for changing linear models.
//!
//! The crate evaluates exact collapsed marginal likelihoods for
//! segmentation × covariate-set models, runs a collapsed Gibbs sampler over
//! changepoint and inclusion indicators, enumerates small model spaces
//! exactly, and provides PELT / optimal-partitioning baselines together
//! with seeded generators for the three reference simulation designs.

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod report;
pub mod sampler;
pub mod simgen;
mod suffstats;

pub use data::{Column, Dataset, DatasetMeta, Design};
pub use error::{Error, Result};
pub use model::{
    log_bayes_factor, log_marginal, log_marginal_at, log_marginal_jeffreys, log_posterior_ratio,
    log_prior, InclusionMask, InclusionPrior, ModelId, ModelKind, PriorConfig, Segmentation, Sigma2,
};
pub use sampler::{run_chain, Chain, ChainState, PosteriorSummary, SamplerConfig};
