//! Collapsed Gibbs sampler over changepoint and inclusion indicators.
//!
//! Block coefficients (and block means in the piecewise-mean model) are
//! integrated out, so every indicator is drawn from its exact full
//! conditional: a Bernoulli whose log odds are the prior log odds plus the
//! change in collapsed log evidence. One sweep updates `I^y_2..I^y_n` in
//! ascending order, then `I^β_1..I^β_p`, then the variances.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Design;
use crate::error::{Error, Result};
use crate::model::{
    check_model, fit_segment_mean, gaussian_block_loglik, log_prior, mean_block_loglik, sigma2_grid,
    tau2_grid, InclusionMask, ModelId, ModelKind, PriorConfig, Segmentation, Sigma2,
};
use crate::numerics::{empirical_sigma2, fit_gram, fit_regularized_ls};
use crate::suffstats::{BlockStats, GramPrefix, MeanStats};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Run length, burn-in, thinning, seed and number of chains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total sweeps per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 8000,
            burn_in: 4000,
            thin: 1,
            seed: 0,
            chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }

    /// Retained samples per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Latent state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub segmentation: Segmentation,
    pub mask: InclusionMask,
    pub sigma2: f64,
    pub tau2: f64,
    pub iteration: usize,
}

impl ChainState {
    /// One block, no optional covariates (columns with `p̃ = 1` included),
    /// variances at their known or empirically estimated values.
    pub fn initial(design: &Design, prior: &PriorConfig) -> Result<Self> {
        prior.validate(design)?;
        let n = design.n_rows();
        let p = design.n_selectable();
        let forced: Vec<usize> = (0..p)
            .filter(|&m| prior.inclusion_prob(m, n) >= 1.0)
            .take(prior.max_covariates)
            .collect();
        let mask = InclusionMask::from_indices(p, &forced)?;
        let segmentation = Segmentation::single(n);
        let sigma2 = match prior.sigma2 {
            Sigma2::Known(s) => s,
            Sigma2::Estimate => {
                let est = empirical_sigma2(design, &segmentation, &mask, prior.tau2)?.value;
                if est > 0.0 {
                    est
                } else {
                    1.0
                }
            }
        };
        Ok(Self {
            segmentation,
            mask,
            sigma2,
            tau2: prior.tau2,
            iteration: 0,
        })
    }

    pub fn model(&self) -> ModelId {
        ModelId::new(self.segmentation.clone(), self.mask.clone())
    }

    fn check(&self, design: &Design, prior: &PriorConfig) {
        debug_assert_eq!(self.segmentation.len(), design.n_rows());
        debug_assert!(!self.segmentation.is_changepoint(0));
        debug_assert_eq!(self.mask.len(), design.n_selectable());
        debug_assert!(self.mask.size() <= prior.max_covariates);
        debug_assert!(self.sigma2 > 0.0 && self.tau2 > 0.0);
        debug_assert!(self.segmentation.blocks().iter().all(|b| !b.is_empty()));
    }
}

#[inline]
fn sigmoid(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

#[inline]
fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

fn draw_log_weights<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.len() - 1
}

enum Stats {
    Mean(MeanStats),
    Regression(GramPrefix),
}

/// Block evidence evaluator backed by prefix sums for the current mask.
struct Evaluator<'a> {
    design: &'a Design,
    prior: &'a PriorConfig,
    stats: Stats,
}

impl<'a> Evaluator<'a> {
    fn new(design: &'a Design, prior: &'a PriorConfig, mask: &InclusionMask) -> Self {
        let stats = match prior.kind {
            ModelKind::PiecewiseMean => Stats::Mean(MeanStats::new(design.y())),
            ModelKind::Regression => Stats::Regression(GramPrefix::new(design, mask)),
        };
        Self { design, prior, stats }
    }

    fn rebuild(&mut self, mask: &InclusionMask) {
        if let Stats::Regression(_) = self.stats {
            self.stats = Stats::Regression(GramPrefix::new(self.design, mask));
        }
    }

    fn gram(&self) -> &GramPrefix {
        match &self.stats {
            Stats::Regression(g) => g,
            Stats::Mean(_) => unreachable!("regression statistics requested for the mean model"),
        }
    }

    fn stats_ll(&self, stats: &BlockStats, sigma2: f64, tau2: f64) -> Result<f64> {
        let k = stats.xty.len();
        let fit = fit_gram(&stats.gram, &stats.xty, stats.yty, &vec![1.0 / tau2; k])?;
        Ok(gaussian_block_loglik(
            stats.n,
            sigma2,
            0.5 * (fit.logdet_prior - fit.logdet_posterior),
            fit.quad,
        ))
    }

    fn block_ll(&self, rows: Range<usize>, sigma2: f64, tau2: f64) -> Result<f64> {
        match &self.stats {
            Stats::Mean(ms) => {
                let (n, s1, s2) = ms.block(rows);
                Ok(mean_block_loglik(n, s1, s2, sigma2, tau2, self.prior.mean_var))
            }
            Stats::Regression(g) => self.stats_ll(&g.block(rows), sigma2, tau2),
        }
    }

    fn total_ll(&self, seg: &Segmentation, sigma2: f64, tau2: f64) -> Result<f64> {
        let mut total = 0.0;
        for rows in seg.blocks() {
            total += self.block_ll(rows, sigma2, tau2)?;
        }
        Ok(total)
    }

    /// Log odds of `I^y_row = 1` against 0 given all other indicators.
    fn changepoint_log_odds(&self, state: &ChainState, start: usize, row: usize, end: usize) -> Result<f64> {
        let (s2, t2) = (state.sigma2, state.tau2);
        let split = self.block_ll(start..row, s2, t2)? + self.block_ll(row..end, s2, t2)?;
        let merged = self.block_ll(start..end, s2, t2)?;
        let lo = logit(self.prior.changepoint_prob) + split - merged;
        if lo.is_nan() {
            return Err(Error::NonFinite(format!("changepoint log odds at row {row}")));
        }
        Ok(lo)
    }

    /// Total evidence with column `m` toggled relative to `state.mask`.
    fn toggled_ll(&self, state: &ChainState, blocks: &[Range<usize>], m: usize) -> Result<f64> {
        let g = self.gram();
        let (s2, t2) = (state.sigma2, state.tau2);
        let mut total = 0.0;
        if state.mask.contains(m) {
            let pos = g
                .cols
                .iter()
                .position(|c| *c == crate::data::Column::Selectable(m))
                .expect("included column is active");
            for rows in blocks {
                total += self.stats_ll(&g.block(rows.clone()).reduced(pos), s2, t2)?;
            }
        } else {
            let k = g.k();
            let y = self.design.y();
            let xm = self.design.column(m);
            for rows in blocks {
                let mut cross = vec![0.0; k];
                let mut sq = 0.0;
                let mut with_y = 0.0;
                for r in rows.clone() {
                    let v = xm[r];
                    for (c, col) in g.cols.iter().enumerate() {
                        cross[c] += self.design.value(r, *col) * v;
                    }
                    sq += v * v;
                    with_y += v * y[r];
                }
                let stats = g.block(rows.clone()).augmented(&cross, sq, with_y);
                total += self.stats_ll(&stats, s2, t2)?;
            }
        }
        Ok(total)
    }

    /// `Some(v)` when the conditional of `I^β_m` is degenerate.
    fn forced_inclusion(&self, state: &ChainState, m: usize) -> Option<bool> {
        let pm = self.prior.inclusion_prob(m, self.design.n_rows());
        let others = state.mask.size() - usize::from(state.mask.contains(m));
        if pm <= 0.0 || others >= self.prior.max_covariates {
            Some(false)
        } else if pm >= 1.0 {
            Some(true)
        } else {
            None
        }
    }

    fn inclusion_log_odds(&self, state: &ChainState, blocks: &[Range<usize>], current: f64, m: usize) -> Result<f64> {
        let alt = self.toggled_ll(state, blocks, m)?;
        let (with, without) = if state.mask.contains(m) {
            (current, alt)
        } else {
            (alt, current)
        };
        let pm = self.prior.inclusion_prob(m, self.design.n_rows());
        let lo = logit(pm) + with - without;
        if lo.is_nan() {
            return Err(Error::NonFinite(format!("inclusion log odds for column {m}")));
        }
        Ok(lo)
    }

    fn sweep_changepoints<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let n = state.segmentation.len();
        // Rows after the current one still hold their values from the start
        // of the sweep, so the next block start can be precomputed.
        let mut next = vec![n; n];
        let mut upcoming = n;
        for i in (0..n).rev() {
            next[i] = upcoming;
            if state.segmentation.is_changepoint(i) {
                upcoming = i;
            }
        }
        let mut start = 0;
        for row in 1..n {
            let lo = self.changepoint_log_odds(state, start, row, next[row])?;
            let on = rng.random::<f64>() < sigmoid(lo);
            state.segmentation.set(row, on);
            if on {
                start = row;
            }
        }
        Ok(())
    }

    fn sweep_inclusion<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let p = state.mask.len();
        if p == 0 || self.prior.kind != ModelKind::Regression {
            return Ok(());
        }
        let blocks = state.segmentation.blocks();
        let mut current = self.total_ll(&state.segmentation, state.sigma2, state.tau2)?;
        for m in 0..p {
            let on = match self.forced_inclusion(state, m) {
                Some(v) => v,
                None => {
                    let lo = self.inclusion_log_odds(state, &blocks, current, m)?;
                    rng.random::<f64>() < sigmoid(lo)
                }
            };
            if on != state.mask.contains(m) {
                state.mask.set(m, on);
                self.rebuild(&state.mask);
                current = self.total_ll(&state.segmentation, state.sigma2, state.tau2)?;
            }
        }
        Ok(())
    }

    fn regression_quad_sum(&self, seg: &Segmentation, tau2: f64) -> Result<f64> {
        let g = self.gram();
        let mut q = 0.0;
        for rows in seg.blocks() {
            let st = g.block(rows);
            q += fit_gram(&st.gram, &st.xty, st.yty, &vec![1.0 / tau2; st.xty.len()])?.quad;
        }
        Ok(q)
    }

    fn update_sigma2<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        match (self.prior.kind, self.prior.sigma2) {
            (_, Sigma2::Known(s)) => state.sigma2 = s,
            (ModelKind::Regression, Sigma2::Estimate) => {
                // σ² | indicators, y ~ IG(n/2, Q/2) with β integrated out.
                let q = self.regression_quad_sum(&state.segmentation, state.tau2)?;
                let n = self.design.n_rows() as f64;
                let floor = 1e-12 * self.energy_scale();
                let rate = (0.5 * q).max(floor);
                let gamma = Gamma::new(0.5 * n, 1.0 / rate)
                    .map_err(|e| Error::NonFinite(format!("variance update: {e}")))?;
                state.sigma2 = (1.0 / gamma.sample(rng)).max(floor);
            }
            (ModelKind::PiecewiseMean, Sigma2::Estimate) => {
                let grid = sigma2_grid(self.design);
                let stats = self.mean_blocks(&state.segmentation);
                let log_w: Vec<f64> = grid
                    .iter()
                    .map(|&s2| self.mean_total(&stats, s2, state.tau2))
                    .collect();
                state.sigma2 = grid[draw_log_weights(&log_w, rng)];
            }
        }
        Ok(())
    }

    fn update_tau2<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        if self.prior.kind != ModelKind::PiecewiseMean || !self.prior.sample_tau2 {
            return Ok(());
        }
        let grid = tau2_grid();
        let stats = self.mean_blocks(&state.segmentation);
        let log_w: Vec<f64> = grid
            .iter()
            .map(|&t2| self.mean_total(&stats, state.sigma2, t2))
            .collect();
        state.tau2 = grid[draw_log_weights(&log_w, rng)];
        Ok(())
    }

    fn energy_scale(&self) -> f64 {
        let y = self.design.y();
        let e = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        if e > 0.0 {
            e
        } else {
            1.0
        }
    }

    fn mean_blocks(&self, seg: &Segmentation) -> Vec<(usize, f64, f64)> {
        match &self.stats {
            Stats::Mean(ms) => seg.blocks().into_iter().map(|r| ms.block(r)).collect(),
            Stats::Regression(_) => unreachable!("mean statistics requested for the regression model"),
        }
    }

    fn mean_total(&self, stats: &[(usize, f64, f64)], sigma2: f64, tau2: f64) -> f64 {
        stats
            .iter()
            .map(|&(n, s1, s2)| mean_block_loglik(n, s1, s2, sigma2, tau2, self.prior.mean_var))
            .sum()
    }

    /// Log posterior of the visited model used to pick the MAP model.
    fn model_log_posterior(&self, state: &ChainState) -> Result<f64> {
        let lp = log_prior(&state.model(), self.prior);
        let ll = match (self.prior.kind, self.prior.sigma2) {
            (ModelKind::Regression, Sigma2::Estimate) => {
                let g = self.gram();
                let mut half = 0.0;
                let mut q = 0.0;
                for rows in state.segmentation.blocks() {
                    let st = g.block(rows);
                    let fit = fit_gram(&st.gram, &st.xty, st.yty, &vec![1.0 / state.tau2; st.xty.len()])?;
                    half += 0.5 * (fit.logdet_prior - fit.logdet_posterior);
                    q += fit.quad;
                }
                let nh = 0.5 * self.design.n_rows() as f64;
                -nh * LN_2PI + half + ln_gamma(nh) - nh * (0.5 * q.max(f64::MIN_POSITIVE)).ln()
            }
            _ => self.total_ll(&state.segmentation, state.sigma2, state.tau2)?,
        };
        Ok(ll + lp)
    }

    /// Adds `E[x_i'β | indicators, variances, y]` for every row into `out`.
    fn add_conditional_mean(&self, state: &ChainState, out: &mut [f64]) -> Result<()> {
        let y = self.design.y();
        match &self.stats {
            Stats::Mean(ms) => {
                for rows in state.segmentation.blocks() {
                    let (n, s1, _) = ms.block(rows.clone());
                    let (m, shrink) =
                        fit_segment_mean(n, s1, state.sigma2, state.tau2, self.prior.mean_var);
                    for r in rows {
                        out[r] += m + shrink * (y[r] - m);
                    }
                }
            }
            Stats::Regression(g) => {
                for rows in state.segmentation.blocks() {
                    let st = g.block(rows.clone());
                    let fit = fit_gram(&st.gram, &st.xty, st.yty, &vec![1.0 / state.tau2; st.xty.len()])?;
                    for r in rows {
                        out[r] += g
                            .cols
                            .iter()
                            .zip(&fit.beta_hat)
                            .map(|(c, b)| self.design.value(r, *c) * b)
                            .sum::<f64>();
                    }
                }
            }
        }
        Ok(())
    }
}

/// A single Markov chain with its own RNG stream.
pub struct Chain<'a> {
    eval: Evaluator<'a>,
    state: ChainState,
    rng: ChaCha8Rng,
}

/// Per-chain generator: ChaCha8 keyed by `seed`, stream `chain`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

impl<'a> Chain<'a> {
    pub fn new(design: &'a Design, prior: &'a PriorConfig, seed: u64, stream: u64) -> Result<Self> {
        let state = ChainState::initial(design, prior)?;
        Self::from_state(design, prior, state, chain_rng(seed, stream))
    }

    pub fn from_state(
        design: &'a Design,
        prior: &'a PriorConfig,
        state: ChainState,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        prior.validate(design)?;
        check_model(design, &state.model(), prior)?;
        Ok(Self {
            eval: Evaluator::new(design, prior, &state.mask),
            state,
            rng,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Full sweep: changepoints, inclusion indicators, then variances.
    pub fn sweep(&mut self) -> Result<()> {
        self.eval.sweep_changepoints(&mut self.state, &mut self.rng)?;
        self.eval.sweep_inclusion(&mut self.state, &mut self.rng)?;
        self.eval.update_sigma2(&mut self.state, &mut self.rng)?;
        self.eval.update_tau2(&mut self.state, &mut self.rng)?;
        self.state.iteration += 1;
        self.state.check(self.eval.design, self.eval.prior);
        Ok(())
    }

    /// `P(I^y_row = 1 | all other indicators, variances, y)`.
    pub fn changepoint_conditional(&self, row: usize) -> Result<f64> {
        let seg = &self.state.segmentation;
        if row == 0 || row >= seg.len() {
            return Err(Error::InvalidModel(format!("row {row} cannot hold a changepoint")));
        }
        let ind = seg.indicators();
        let start = (0..row).rev().find(|&i| ind[i]).unwrap_or(0);
        let end = (row + 1..seg.len()).find(|&i| ind[i]).unwrap_or(seg.len());
        Ok(sigmoid(self.eval.changepoint_log_odds(&self.state, start, row, end)?))
    }

    /// `P(I^β_m = 1 | all other indicators, variances, y)`.
    pub fn inclusion_conditional(&self, m: usize) -> Result<f64> {
        if self.eval.prior.kind != ModelKind::Regression || m >= self.state.mask.len() {
            return Err(Error::InvalidModel(format!("column {m} is not selectable")));
        }
        if let Some(v) = self.eval.forced_inclusion(&self.state, m) {
            return Ok(if v { 1.0 } else { 0.0 });
        }
        let blocks = self.state.segmentation.blocks();
        let current = self.eval.total_ll(&self.state.segmentation, self.state.sigma2, self.state.tau2)?;
        Ok(sigmoid(self.eval.inclusion_log_odds(&self.state, &blocks, current, m)?))
    }
}

/// One systematic-scan sweep over `I^y_2..I^y_n`.
pub fn gibbs_sweep_changepoints<R: Rng + ?Sized>(
    state: &ChainState,
    design: &Design,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<ChainState> {
    check_model(design, &state.model(), prior)?;
    let eval = Evaluator::new(design, prior, &state.mask);
    let mut next = state.clone();
    eval.sweep_changepoints(&mut next, rng)?;
    Ok(next)
}

/// One systematic-scan sweep over `I^β_1..I^β_p`; inclusion is forced off
/// once `q_n` other columns are included.
pub fn gibbs_sweep_inclusion<R: Rng + ?Sized>(
    state: &ChainState,
    design: &Design,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<ChainState> {
    check_model(design, &state.model(), prior)?;
    let mut eval = Evaluator::new(design, prior, &state.mask);
    let mut next = state.clone();
    eval.sweep_inclusion(&mut next, rng)?;
    Ok(next)
}

/// Draws `σ²` from its full conditional given the indicators: inverse gamma
/// for the regression model, a 200-point log grid for the piecewise mean.
pub fn update_sigma2<R: Rng + ?Sized>(
    state: &ChainState,
    design: &Design,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<ChainState> {
    check_model(design, &state.model(), prior)?;
    let eval = Evaluator::new(design, prior, &state.mask);
    let mut next = state.clone();
    eval.update_sigma2(&mut next, rng)?;
    Ok(next)
}

/// Grid Gibbs step for `τ²` in the piecewise-mean model; a no-op otherwise.
pub fn update_tau2<R: Rng + ?Sized>(
    state: &ChainState,
    design: &Design,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<ChainState> {
    check_model(design, &state.model(), prior)?;
    let eval = Evaluator::new(design, prior, &state.mask);
    let mut next = state.clone();
    eval.update_tau2(&mut next, rng)?;
    Ok(next)
}

/// Posterior mean of the regression function (or of `θ_i`) averaged over
/// the given states, each contributing its conditional expectation given
/// indicators and variances. Indexed by original observation; the
/// conditioned-on first observation of an AR design is reported as observed.
pub fn fitted_means(states: &[ChainState], design: &Design, prior: &PriorConfig) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::InvalidModel("no samples to average".into()));
    }
    let n = design.n_rows();
    let y = design.y();
    let mut acc = vec![0.0; n];
    for st in states {
        let model = st.model();
        check_model(design, &model, prior)?;
        for rows in st.segmentation.blocks() {
            match prior.kind {
                ModelKind::PiecewiseMean => {
                    let s1: f64 = y[rows.clone()].iter().sum();
                    let (m, shrink) = fit_segment_mean(rows.len(), s1, st.sigma2, st.tau2, prior.mean_var);
                    for r in rows {
                        acc[r] += m + shrink * (y[r] - m);
                    }
                }
                ModelKind::Regression => {
                    let seg = design.segment(rows.clone(), &st.mask)?;
                    let fit = fit_regularized_ls(&seg, &vec![1.0 / st.tau2; seg.ncols()])?;
                    let fitted = &seg.x * &fit.beta_hat;
                    for (i, r) in rows.enumerate() {
                        acc[r] += fitted[i];
                    }
                }
            }
        }
    }
    let k = states.len() as f64;
    Ok(to_original(design, acc.into_iter().map(|v| v / k).collect()))
}

fn to_original(design: &Design, rows: Vec<f64>) -> Vec<f64> {
    if design.offset() == 0 {
        return rows;
    }
    let mut out = Vec::with_capacity(design.n_original());
    // The conditioned-on prefix is not modeled; the lag column holds it.
    let lag = design.column(design.n_selectable() - 1);
    out.push(lag[0]);
    out.extend(rows);
    out
}

/// Per-chain summary kept for convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub n_samples: usize,
    pub cp_prob: Vec<f64>,
    pub pip: Vec<f64>,
    pub partition_count_dist: BTreeMap<usize, f64>,
    pub sigma2_mean: f64,
}

/// Posterior summaries pooled over retained samples of all chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Per original index; entry `i-1` is `P(I^y_i = 1 | y)`.
    pub cp_prob: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// Posterior inclusion probability of each selectable column.
    pub pip: Vec<f64>,
    pub partition_count_dist: BTreeMap<usize, f64>,
    pub model_size_dist: BTreeMap<usize, f64>,
    pub fitted_mean: Vec<f64>,
    pub map_model: ModelId,
    /// Block starts of the MAP model as 1-based original indices.
    pub map_changepoints: Vec<usize>,
    pub map_log_posterior: f64,
    pub sigma2_mean: f64,
    pub tau2_mean: f64,
    pub n_samples: usize,
    pub chains: Vec<ChainDiagnostics>,
}

impl PosteriorSummary {
    /// Most probable number of blocks (smallest on ties).
    pub fn partition_count_mode(&self) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (&k, &p) in &self.partition_count_dist {
            if p > best.1 {
                best = (k, p);
            }
        }
        best.0
    }

    /// Posterior changepoint mass within `radius` of a 1-based index.
    pub fn changepoint_mass_near(&self, index: usize, radius: usize) -> f64 {
        let lo = index.saturating_sub(radius).max(1);
        let hi = (index + radius).min(self.cp_prob.len());
        (lo..=hi).map(|i| self.cp_prob[i - 1]).sum()
    }

    /// Columns with inclusion probability above `threshold`.
    pub fn selected(&self, threshold: f64) -> Vec<usize> {
        self.pip
            .iter()
            .enumerate()
            .filter_map(|(m, &p)| (p > threshold).then_some(m))
            .collect()
    }

    /// Changepoint estimates: for each maximal run of indices whose windowed
    /// mass (± `radius`) reaches `threshold`, the index of largest `cp_prob`.
    pub fn changepoint_estimates(&self, radius: usize, threshold: f64) -> Vec<usize> {
        let n = self.cp_prob.len();
        let mut out = Vec::new();
        let mut i = 1;
        while i <= n {
            if self.changepoint_mass_near(i, radius) >= threshold {
                let mut j = i;
                while j < n && self.changepoint_mass_near(j + 1, radius) >= threshold {
                    j += 1;
                }
                let peak = (i..=j)
                    .max_by(|a, b| {
                        self.cp_prob[a - 1]
                            .partial_cmp(&self.cp_prob[b - 1])
                            .unwrap()
                            .then(b.cmp(a))
                    })
                    .unwrap();
                out.push(peak);
                i = j + 1;
            } else {
                i += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    n_samples: usize,
    cp: Vec<u64>,
    pip: Vec<u64>,
    parts: BTreeMap<usize, u64>,
    sizes: BTreeMap<usize, u64>,
    fitted: Vec<f64>,
    sigma2: f64,
    tau2: f64,
    map: Option<(f64, ModelId)>,
}

impl Accumulator {
    fn new(n: usize, p: usize) -> Self {
        Self {
            n_samples: 0,
            cp: vec![0; n],
            pip: vec![0; p],
            parts: BTreeMap::new(),
            sizes: BTreeMap::new(),
            fitted: vec![0.0; n],
            sigma2: 0.0,
            tau2: 0.0,
            map: None,
        }
    }

    fn record(&mut self, eval: &Evaluator<'_>, state: &ChainState) -> Result<()> {
        self.n_samples += 1;
        for (c, &b) in self.cp.iter_mut().zip(state.segmentation.indicators()) {
            *c += u64::from(b);
        }
        for (c, &b) in self.pip.iter_mut().zip(state.mask.as_slice()) {
            *c += u64::from(b);
        }
        *self.parts.entry(state.segmentation.n_blocks()).or_default() += 1;
        *self.sizes.entry(state.mask.size()).or_default() += 1;
        eval.add_conditional_mean(state, &mut self.fitted)?;
        self.sigma2 += state.sigma2;
        self.tau2 += state.tau2;
        let lp = eval.model_log_posterior(state)?;
        if !lp.is_finite() {
            return Err(Error::NonFinite("log posterior of visited model".into()));
        }
        if self.map.as_ref().is_none_or(|(best, _)| lp > *best) {
            self.map = Some((lp, state.model()));
        }
        Ok(())
    }

    fn merge(&mut self, other: &Accumulator) {
        self.n_samples += other.n_samples;
        for (a, b) in self.cp.iter_mut().zip(&other.cp) {
            *a += b;
        }
        for (a, b) in self.pip.iter_mut().zip(&other.pip) {
            *a += b;
        }
        for (k, v) in &other.parts {
            *self.parts.entry(*k).or_default() += v;
        }
        for (k, v) in &other.sizes {
            *self.sizes.entry(*k).or_default() += v;
        }
        for (a, b) in self.fitted.iter_mut().zip(&other.fitted) {
            *a += b;
        }
        self.sigma2 += other.sigma2;
        self.tau2 += other.tau2;
        if let Some((lp, m)) = &other.map {
            if self.map.as_ref().is_none_or(|(best, _)| lp > best) {
                self.map = Some((*lp, m.clone()));
            }
        }
    }

    fn normalized(counts: &BTreeMap<usize, u64>, n: usize) -> BTreeMap<usize, f64> {
        counts.iter().map(|(k, v)| (*k, *v as f64 / n as f64)).collect()
    }

    fn cp_prob(&self, design: &Design) -> Vec<f64> {
        let mut out = vec![0.0; design.n_original()];
        for (r, c) in self.cp.iter().enumerate().skip(1) {
            out[design.index_of_row(r) - 1] = *c as f64 / self.n_samples as f64;
        }
        out
    }

    fn pip_prob(&self) -> Vec<f64> {
        self.pip
            .iter()
            .map(|c| *c as f64 / self.n_samples as f64)
            .collect()
    }

    fn diagnostics(&self, chain: usize, design: &Design) -> ChainDiagnostics {
        ChainDiagnostics {
            chain,
            n_samples: self.n_samples,
            cp_prob: self.cp_prob(design),
            pip: self.pip_prob(),
            partition_count_dist: Self::normalized(&self.parts, self.n_samples),
            sigma2_mean: self.sigma2 / self.n_samples as f64,
        }
    }
}

fn run_single(design: &Design, prior: &PriorConfig, config: &SamplerConfig, chain: usize) -> Result<Accumulator> {
    let mut ch = Chain::new(design, prior, config.seed, chain as u64)?;
    let mut acc = Accumulator::new(design.n_rows(), design.n_selectable());
    for it in 0..config.iterations {
        ch.sweep()?;
        if it >= config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            acc.record(&ch.eval, &ch.state)?;
        }
    }
    Ok(acc)
}

/// Runs `config.chains` independent chains in parallel and pools their
/// retained samples. Deterministic given the seed.
pub fn run_chain(design: &Design, prior: &PriorConfig, config: &SamplerConfig) -> Result<PosteriorSummary> {
    config.validate()?;
    prior.validate(design)?;
    let per_chain: Vec<Accumulator> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_single(design, prior, config, c))
        .collect::<Result<_>>()?;
    let mut pooled = Accumulator::new(design.n_rows(), design.n_selectable());
    for acc in &per_chain {
        pooled.merge(acc);
    }
    let ns = pooled.n_samples;
    let (map_log_posterior, map_model) = pooled.map.clone().expect("at least one retained sample");
    Ok(PosteriorSummary {
        cp_prob: pooled.cp_prob(design),
        covariate_names: design.names().to_vec(),
        pip: pooled.pip_prob(),
        partition_count_dist: Accumulator::normalized(&pooled.parts, ns),
        model_size_dist: Accumulator::normalized(&pooled.sizes, ns),
        fitted_mean: to_original(design, pooled.fitted.iter().map(|v| v / ns as f64).collect()),
        map_changepoints: design.changepoints_of(&map_model.segmentation),
        map_model,
        map_log_posterior,
        sigma2_mean: pooled.sigma2 / ns as f64,
        tau2_mean: pooled.tau2 / ns as f64,
        n_samples: ns,
        chains: per_chain
            .iter()
            .enumerate()
            .map(|(c, a)| a.diagnostics(c, design))
            .collect(),
    })
}
