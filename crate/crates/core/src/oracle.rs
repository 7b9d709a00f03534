//! Exact posterior over every segmentation × covariate set of a small
//! instance. Serves as ground truth for the Gibbs sampler.
//!
//! Variances follow the sampler's treatment: known values are plugged in;
//! an estimated regression `σ²` is integrated in closed form against
//! `1/σ²`; grid-sampled piecewise-mean variances are summed over the same
//! log grids the sampler uses.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Design;
use crate::error::{Error, Result};
use crate::model::{
    log_marginal_at, log_marginal_jeffreys, log_prior, mean_block_loglik, sigma2_grid, tau2_grid,
    InclusionMask, ModelId, ModelKind, PriorConfig, Segmentation, Sigma2,
};

pub const DEFAULT_MAX_N: usize = 12;
pub const DEFAULT_MAX_P: usize = 3;

/// Normalized exact posterior and its marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    /// Every admissible model with its log unnormalized posterior.
    pub table: Vec<(ModelId, f64)>,
    pub log_normalizer: f64,
    /// Per original index, as in `PosteriorSummary::cp_prob`.
    pub cp_prob: Vec<f64>,
    pub pip: Vec<f64>,
    pub partition_count_dist: BTreeMap<usize, f64>,
    pub model_size_dist: BTreeMap<usize, f64>,
    pub map_model: ModelId,
}

impl ExactPosterior {
    pub fn probability(&self, model: &ModelId) -> f64 {
        self.table
            .iter()
            .find(|(m, _)| m == model)
            .map_or(0.0, |(_, lp)| (lp - self.log_normalizer).exp())
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (&ModelId, f64)> {
        self.table
            .iter()
            .map(move |(m, lp)| (m, (lp - self.log_normalizer).exp()))
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn mean_model_evidence(design: &Design, model: &ModelId, prior: &PriorConfig) -> Result<f64> {
    let sigma_values = match prior.sigma2 {
        Sigma2::Known(s) => vec![s],
        Sigma2::Estimate => sigma2_grid(design),
    };
    let tau_values = if prior.sample_tau2 {
        tau2_grid()
    } else {
        vec![prior.tau2]
    };
    if sigma_values.len() == 1 && tau_values.len() == 1 {
        return log_marginal_at(design, model, prior, sigma_values[0]);
    }
    let y = design.y();
    let stats: Vec<(usize, f64, f64)> = model
        .segmentation
        .blocks()
        .into_iter()
        .map(|r| {
            let b = &y[r];
            (b.len(), b.iter().sum(), b.iter().map(|v| v * v).sum())
        })
        .collect();
    let mut terms = Vec::with_capacity(sigma_values.len() * tau_values.len());
    for &s2 in &sigma_values {
        for &t2 in &tau_values {
            terms.push(
                stats
                    .iter()
                    .map(|&(n, s1, sq)| mean_block_loglik(n, s1, sq, s2, t2, prior.mean_var))
                    .sum::<f64>(),
            );
        }
    }
    let count = terms.len() as f64;
    Ok(log_sum_exp(terms) - count.ln())
}

/// Log evidence of `model` with variances treated as in the sampler.
pub fn model_evidence(design: &Design, model: &ModelId, prior: &PriorConfig) -> Result<f64> {
    match (prior.kind, prior.sigma2) {
        (ModelKind::Regression, Sigma2::Known(s)) => log_marginal_at(design, model, prior, s),
        (ModelKind::Regression, Sigma2::Estimate) => log_marginal_jeffreys(design, model, prior),
        (ModelKind::PiecewiseMean, _) => mean_model_evidence(design, model, prior),
    }
}

/// Enumerates all `2^(n-1)` segmentations times every admissible mask
/// (at most `q_n` columns, finite prior) and normalizes.
pub fn enumerate_exact(design: &Design, prior: &PriorConfig, n_max: usize, p_max: usize) -> Result<ExactPosterior> {
    prior.validate(design)?;
    let n_orig = design.n_original();
    let n = design.n_rows();
    let p = design.n_selectable();
    if n_orig > n_max {
        return Err(Error::TooLarge(format!("n = {n_orig} exceeds {n_max}")));
    }
    if p > p_max {
        return Err(Error::TooLarge(format!("p = {p} exceeds {p_max}")));
    }
    let masks: Vec<InclusionMask> = (0..1u64 << p)
        .map(|c| InclusionMask::from_code(p, c))
        .filter(|m| m.size() <= prior.max_covariates)
        .collect();
    let table: Vec<(ModelId, f64)> = (0..1u64 << (n - 1))
        .into_par_iter()
        .map(|code| {
            let seg = Segmentation::from_code(n, code);
            let mut out = Vec::with_capacity(masks.len());
            for mask in &masks {
                let model = ModelId::new(seg.clone(), mask.clone());
                let lp = log_prior(&model, prior);
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let score = model_evidence(design, &model, prior)? + lp;
                if score.is_nan() {
                    return Err(Error::NonFinite("enumerated log posterior".into()));
                }
                out.push((model, score));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let log_normalizer = log_sum_exp(table.iter().map(|(_, s)| *s));
    if !log_normalizer.is_finite() {
        return Err(Error::NonFinite("posterior normalizer".into()));
    }
    let mut cp_rows = vec![0.0; n];
    let mut pip = vec![0.0; p];
    let mut parts = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    let mut map = (f64::NEG_INFINITY, None);
    for (model, score) in &table {
        let w = (score - log_normalizer).exp();
        for (acc, &b) in cp_rows.iter_mut().zip(model.segmentation.indicators()) {
            if b {
                *acc += w;
            }
        }
        for (acc, &b) in pip.iter_mut().zip(model.mask.as_slice()) {
            if b {
                *acc += w;
            }
        }
        *parts.entry(model.segmentation.n_blocks()).or_insert(0.0) += w;
        *sizes.entry(model.mask.size()).or_insert(0.0) += w;
        if *score > map.0 {
            map = (*score, Some(model));
        }
    }
    let mut cp_prob = vec![0.0; n_orig];
    for (r, v) in cp_rows.iter().enumerate().skip(1) {
        cp_prob[design.index_of_row(r) - 1] = *v;
    }
    let map_model = map.1.cloned().expect("non-empty table");
    Ok(ExactPosterior {
        table,
        log_normalizer,
        cp_prob,
        pip,
        partition_count_dist: parts,
        model_size_dist: sizes,
        map_model,
    })
}
