//! Model space, priors and collapsed marginal likelihoods.
//!
//! A model is a segmentation of the likelihood rows into contiguous blocks
//! together with a global inclusion mask over the selectable columns. Block
//! coefficients are integrated out analytically: with prior
//! `β_j ~ N(0, σ² S⁻¹)` and `S = τ⁻² I`, the block evidence is
//!
//! ```text
//! log L_j = −(n_j/2) log(2πσ²) + ½ log det S − ½ log det(X_j'X_j + S) − quad_j / (2σ²)
//! quad_j  = y_j'y_j − y_j'X_j (X_j'X_j + S)⁻¹ X_j'y_j
//! ```
//!
//! The piecewise-mean model (`θ_i ~ N(μ_j, τ²)`, `μ_j ~ N(0, V)`) collapses
//! to the same form with a single intercept column, noise variance
//! `a = σ² + τ²` and precision `S = a / V`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Design;
use crate::error::{Error, Result};
use crate::numerics::{empirical_sigma2, fit_regularized_ls};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Changepoint indicators over likelihood rows. `indicators[0]` is always
/// false; `indicators[i] = true` starts a new block at row `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SegmentationRepr", into = "SegmentationRepr")]
pub struct Segmentation {
    indicators: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct SegmentationRepr {
    len: usize,
    starts: Vec<usize>,
}

impl TryFrom<SegmentationRepr> for Segmentation {
    type Error = Error;
    fn try_from(r: SegmentationRepr) -> Result<Self> {
        Segmentation::from_starts(r.len, &r.starts)
    }
}

impl From<Segmentation> for SegmentationRepr {
    fn from(s: Segmentation) -> Self {
        SegmentationRepr {
            len: s.len(),
            starts: s.starts(),
        }
    }
}

impl Segmentation {
    pub fn new(indicators: Vec<bool>) -> Result<Self> {
        if indicators.is_empty() {
            return Err(Error::InvalidModel("segmentation over zero rows".into()));
        }
        if indicators[0] {
            return Err(Error::InvalidModel("first row cannot be a changepoint".into()));
        }
        Ok(Self { indicators })
    }

    /// A single block covering `n` rows.
    pub fn single(n: usize) -> Self {
        Self {
            indicators: vec![false; n.max(1)],
        }
    }

    /// Blocks start at row 0 and at every entry of `starts` (0-based rows).
    pub fn from_starts(n: usize, starts: &[usize]) -> Result<Self> {
        let mut indicators = vec![false; n];
        for &s in starts {
            if s == 0 || s >= n {
                return Err(Error::InvalidModel(format!(
                    "block start {s} outside 1..{n}"
                )));
            }
            indicators[s] = true;
        }
        Self::new(indicators)
    }

    /// Decodes the bits of `code` as indicators for rows `1..n`.
    pub fn from_code(n: usize, code: u64) -> Self {
        let mut indicators = vec![false; n];
        for (i, ind) in indicators.iter_mut().enumerate().skip(1) {
            *ind = (code >> (i - 1)) & 1 == 1;
        }
        Self { indicators }
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn indicators(&self) -> &[bool] {
        &self.indicators
    }

    pub fn is_changepoint(&self, row: usize) -> bool {
        self.indicators[row]
    }

    pub(crate) fn set(&mut self, row: usize, value: bool) {
        debug_assert!(row > 0);
        self.indicators[row] = value;
    }

    /// Rows where a new block starts, excluding row 0.
    pub fn starts(&self) -> Vec<usize> {
        self.indicators
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn n_changepoints(&self) -> usize {
        self.indicators.iter().filter(|b| **b).count()
    }

    pub fn n_blocks(&self) -> usize {
        1 + self.n_changepoints()
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.n_blocks());
        let mut start = 0;
        for (i, &b) in self.indicators.iter().enumerate().skip(1) {
            if b {
                out.push(start..i);
                start = i;
            }
        }
        out.push(start..self.len());
        out
    }
}

/// Global inclusion indicators over the selectable columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MaskRepr", into = "MaskRepr")]
pub struct InclusionMask {
    included: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    len: usize,
    included: Vec<usize>,
}

impl TryFrom<MaskRepr> for InclusionMask {
    type Error = Error;
    fn try_from(r: MaskRepr) -> Result<Self> {
        InclusionMask::from_indices(r.len, &r.included)
    }
}

impl From<InclusionMask> for MaskRepr {
    fn from(m: InclusionMask) -> Self {
        MaskRepr {
            len: m.len(),
            included: m.indices(),
        }
    }
}

impl InclusionMask {
    pub fn new(included: Vec<bool>) -> Self {
        Self { included }
    }

    pub fn empty(p: usize) -> Self {
        Self {
            included: vec![false; p],
        }
    }

    /// Mask including the given 0-based column indices.
    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let mut included = vec![false; p];
        for &m in indices {
            if m >= p {
                return Err(Error::InvalidModel(format!("column {m} outside 0..{p}")));
            }
            included[m] = true;
        }
        Ok(Self { included })
    }

    pub fn from_code(p: usize, code: u64) -> Self {
        Self {
            included: (0..p).map(|m| (code >> m) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn size(&self) -> usize {
        self.included.iter().filter(|b| **b).count()
    }

    pub fn contains(&self, m: usize) -> bool {
        self.included[m]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.included
    }

    pub(crate) fn set(&mut self, m: usize, value: bool) {
        self.included[m] = value;
    }

    pub fn indices(&self) -> Vec<usize> {
        self.included
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// A point in model space: changepoint configuration plus covariate set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelId {
    pub segmentation: Segmentation,
    pub mask: InclusionMask,
}

impl ModelId {
    pub fn new(segmentation: Segmentation, mask: InclusionMask) -> Self {
        Self { segmentation, mask }
    }

    /// One block, no covariates.
    pub fn null(design: &Design) -> Self {
        Self {
            segmentation: Segmentation::single(design.n_rows()),
            mask: InclusionMask::empty(design.n_selectable()),
        }
    }
}

/// Which hierarchical model the blocks follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Piecewise-constant mean: `y_i ~ N(θ_i, σ²)`, `θ_i ~ N(μ_j, τ²)`, `μ_j ~ N(0, V)`.
    PiecewiseMean,
    /// Changing linear regression with spike-and-slab coefficients.
    Regression,
}

/// Noise variance handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Sigma2Repr", into = "Sigma2Repr")]
pub enum Sigma2 {
    Known(f64),
    /// Plug-in `σ̂²` for direct evaluation; Jeffreys prior `π(σ²) ∝ 1/σ²`
    /// inside the sampler and the exact oracle.
    Estimate,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Sigma2Repr {
    Value(f64),
    Mode(String),
}

impl TryFrom<Sigma2Repr> for Sigma2 {
    type Error = Error;
    fn try_from(r: Sigma2Repr) -> Result<Self> {
        match r {
            Sigma2Repr::Value(v) => Ok(Sigma2::Known(v)),
            Sigma2Repr::Mode(s) if s.eq_ignore_ascii_case("estimate") => Ok(Sigma2::Estimate),
            Sigma2Repr::Mode(s) => s
                .parse::<f64>()
                .map(Sigma2::Known)
                .map_err(|_| Error::Config(format!("sigma2 must be a number or \"estimate\", got {s:?}"))),
        }
    }
}

impl From<Sigma2> for Sigma2Repr {
    fn from(s: Sigma2) -> Self {
        match s {
            Sigma2::Known(v) => Sigma2Repr::Value(v),
            Sigma2::Estimate => Sigma2Repr::Mode("estimate".into()),
        }
    }
}

impl std::str::FromStr for Sigma2 {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Sigma2::try_from(Sigma2Repr::Mode(s.to_string()))
    }
}

/// Prior inclusion probability `p̃_m` of each selectable column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionPrior {
    Fixed(f64),
    PerColumn(Vec<f64>),
    /// `p̃ = exp(−(log n)^{1+α₁})`.
    Penalized { alpha1: f64 },
}

impl InclusionPrior {
    pub fn prob(&self, m: usize, n: usize) -> f64 {
        match self {
            InclusionPrior::Fixed(p) => *p,
            InclusionPrior::PerColumn(v) => v[m],
            InclusionPrior::Penalized { alpha1 } => penalized_inclusion_prob(n, *alpha1),
        }
    }
}

/// `exp(−(log n)^{1+α₁})`.
pub fn penalized_inclusion_prob(n: usize, alpha1: f64) -> f64 {
    (-(n as f64).ln().powf(1.0 + alpha1)).exp()
}

/// Default cap on the number of selected columns: `min(p, ⌈2 log n⌉)`.
pub fn default_max_covariates(n: usize, p: usize) -> usize {
    p.min((2.0 * (n as f64).ln()).ceil() as usize)
}

/// All hyperparameters of both hierarchies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub kind: ModelKind,
    /// `p_n`, the prior probability of a changepoint at each row.
    pub changepoint_prob: f64,
    pub inclusion: InclusionPrior,
    /// Slab variance scale (regression) or within-block spread (piecewise mean).
    pub tau2: f64,
    /// Resample `τ²` on a log grid under `π(τ²) ∝ 1/τ²` (piecewise mean only).
    pub sample_tau2: bool,
    /// `V`, prior variance of block means (piecewise mean only).
    pub mean_var: f64,
    pub sigma2: Sigma2,
    /// `q_n`, maximum number of selected columns.
    pub max_covariates: usize,
}

impl PriorConfig {
    /// Defaults: `p_n = 1/n`, `τ² = 1`, `V = 1`, `p̃ = exp(−(log n)^{1.1})`,
    /// `σ²` estimated. Covariate-free designs get the piecewise-mean model.
    pub fn defaults_for(design: &Design) -> Self {
        let n = design.n_rows();
        let p = design.n_selectable();
        let kind = if p == 0 {
            ModelKind::PiecewiseMean
        } else {
            ModelKind::Regression
        };
        Self {
            kind,
            changepoint_prob: 1.0 / n as f64,
            inclusion: InclusionPrior::Penalized { alpha1: 0.1 },
            tau2: 1.0,
            sample_tau2: kind == ModelKind::PiecewiseMean,
            mean_var: 1.0,
            sigma2: Sigma2::Estimate,
            max_covariates: default_max_covariates(n, p),
        }
    }

    /// Sets `p_n = c_n / n`.
    pub fn with_expected_changepoints(mut self, c_n: f64, n: usize) -> Self {
        self.changepoint_prob = c_n / n as f64;
        self
    }

    pub fn validate(&self, design: &Design) -> Result<()> {
        let p = design.n_selectable();
        if !(self.changepoint_prob > 0.0 && self.changepoint_prob < 1.0) {
            return Err(Error::Config(format!(
                "changepoint probability must lie in (0, 1), got {}",
                self.changepoint_prob
            )));
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(Error::Config(format!("tau2 must be positive, got {}", self.tau2)));
        }
        if !(self.mean_var > 0.0 && self.mean_var.is_finite()) {
            return Err(Error::Config(format!("V must be positive, got {}", self.mean_var)));
        }
        if let Sigma2::Known(s) = self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma2 must be positive, got {s}")));
            }
        }
        if self.max_covariates > p {
            return Err(Error::Config(format!(
                "max_covariates {} exceeds the {p} selectable columns",
                self.max_covariates
            )));
        }
        match &self.inclusion {
            InclusionPrior::Fixed(v) if !(0.0..=1.0).contains(v) => {
                return Err(Error::Config(format!("inclusion probability {v} outside [0, 1]")))
            }
            InclusionPrior::PerColumn(v) => {
                if v.len() != p {
                    return Err(Error::Config(format!(
                        "{} inclusion probabilities for {p} columns",
                        v.len()
                    )));
                }
                if let Some(bad) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::Config(format!("inclusion probability {bad} outside [0, 1]")));
                }
            }
            InclusionPrior::Penalized { alpha1 } if !(*alpha1 >= 0.0) => {
                return Err(Error::Config(format!("alpha1 must be non-negative, got {alpha1}")))
            }
            _ => {}
        }
        if self.kind == ModelKind::PiecewiseMean && p > 0 {
            return Err(Error::Config(
                "the piecewise-mean model takes no selectable columns".into(),
            ));
        }
        if self.kind == ModelKind::Regression && self.sample_tau2 {
            return Err(Error::Config(
                "tau2 resampling is only available for the piecewise-mean model".into(),
            ));
        }
        Ok(())
    }

    pub fn inclusion_prob(&self, m: usize, n: usize) -> f64 {
        self.inclusion.prob(m, n)
    }
}

/// Log-spaced grid of `GRID_POINTS` values over `[lo, hi]`.
pub const GRID_POINTS: usize = 200;
pub const TAU2_GRID_RANGE: (f64, f64) = (1e-4, 1e4);

pub fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..GRID_POINTS)
        .map(|g| (a + (b - a) * g as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
}

pub fn tau2_grid() -> Vec<f64> {
    log_grid(TAU2_GRID_RANGE.0, TAU2_GRID_RANGE.1)
}

/// Grid for the piecewise-mean noise variance, spanning `[1e-4, 1e4]` times
/// the sample variance of the response.
pub fn sigma2_grid(design: &Design) -> Vec<f64> {
    let y = design.y();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = if y.len() > 1 {
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let scale = if var > 0.0 && var.is_finite() { var } else { 1.0 };
    log_grid(1e-4 * scale, 1e4 * scale)
}

#[inline]
pub(crate) fn bernoulli_logpmf(x: bool, p: f64) -> f64 {
    if x {
        p.ln()
    } else {
        (-p).ln_1p()
    }
}

/// Block evidence under known noise variance, given the collapsed fit terms.
#[inline]
pub(crate) fn gaussian_block_loglik(n: usize, sigma2: f64, half_logdet_ratio: f64, quad: f64) -> f64 {
    -0.5 * n as f64 * (LN_2PI + sigma2.ln()) + half_logdet_ratio - quad / (2.0 * sigma2)
}

/// Piecewise-mean block evidence from `(n, Σy, Σy²)`.
#[inline]
pub(crate) fn mean_block_loglik(n: usize, sum: f64, sumsq: f64, sigma2: f64, tau2: f64, mean_var: f64) -> f64 {
    let a = sigma2 + tau2;
    let prec = a / mean_var;
    let nf = n as f64;
    let quad = (sumsq - sum * sum / (nf + prec)).max(0.0);
    gaussian_block_loglik(n, a, 0.5 * (prec.ln() - (nf + prec).ln()), quad)
}

/// Posterior mean of the block mean `μ_j` and the weight `τ²/(σ²+τ²)` with
/// which `E[θ_i | y]` moves from it towards `y_i`.
#[inline]
pub(crate) fn fit_segment_mean(n: usize, sum: f64, sigma2: f64, tau2: f64, mean_var: f64) -> (f64, f64) {
    let a = sigma2 + tau2;
    (sum / (n as f64 + a / mean_var), tau2 / a)
}

/// Per-block collapsed terms: `(n_j, ½(log det S − log det(X'X+S)), quad_j)`.
pub(crate) fn block_terms(
    design: &Design,
    rows: Range<usize>,
    model: &ModelId,
    prior: &PriorConfig,
) -> Result<(usize, f64, f64)> {
    let seg = design.segment(rows, &model.mask)?;
    let k = seg.ncols();
    let fit = fit_regularized_ls(&seg, &vec![1.0 / prior.tau2; k])?;
    Ok((
        seg.len(),
        0.5 * (fit.logdet_prior - fit.logdet_posterior),
        fit.quad,
    ))
}

pub(crate) fn check_model(design: &Design, model: &ModelId, prior: &PriorConfig) -> Result<()> {
    if model.segmentation.len() != design.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation covers {} rows, design has {}",
            model.segmentation.len(),
            design.n_rows()
        )));
    }
    if model.mask.len() != design.n_selectable() {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries, design has {} selectable columns",
            model.mask.len(),
            design.n_selectable()
        )));
    }
    if model.mask.size() > prior.max_covariates {
        return Err(Error::MaskTooLarge {
            size: model.mask.size(),
            max: prior.max_covariates,
        });
    }
    if prior.kind == ModelKind::PiecewiseMean && design.n_selectable() > 0 {
        return Err(Error::Config(
            "the piecewise-mean model takes no selectable columns".into(),
        ));
    }
    Ok(())
}

/// Collapsed log evidence of each block at a fixed noise variance.
pub fn block_log_marginals(
    design: &Design,
    model: &ModelId,
    prior: &PriorConfig,
    sigma2: f64,
) -> Result<Vec<f64>> {
    check_model(design, model, prior)?;
    let y = design.y();
    model
        .segmentation
        .blocks()
        .into_iter()
        .map(|rows| match prior.kind {
            ModelKind::PiecewiseMean => {
                let block = &y[rows];
                let sum: f64 = block.iter().sum();
                let sumsq: f64 = block.iter().map(|v| v * v).sum();
                Ok(mean_block_loglik(block.len(), sum, sumsq, sigma2, prior.tau2, prior.mean_var))
            }
            ModelKind::Regression => {
                let (n, half, quad) = block_terms(design, rows, model, prior)?;
                Ok(gaussian_block_loglik(n, sigma2, half, quad))
            }
        })
        .collect()
}

/// Total collapsed log evidence at a fixed noise variance.
pub fn log_marginal_at(design: &Design, model: &ModelId, prior: &PriorConfig, sigma2: f64) -> Result<f64> {
    let total: f64 = block_log_marginals(design, model, prior, sigma2)?.iter().sum();
    if total.is_nan() {
        return Err(Error::NonFinite("log marginal likelihood".into()));
    }
    Ok(total)
}

/// Noise variance used for direct evaluation of `model`: the known value,
/// or the model's own empirical estimate.
pub fn plug_in_sigma2(design: &Design, model: &ModelId, prior: &PriorConfig) -> Result<f64> {
    match prior.sigma2 {
        Sigma2::Known(s) => Ok(s),
        Sigma2::Estimate => {
            let est = empirical_sigma2(design, &model.segmentation, &model.mask, prior.tau2)?;
            if !(est.value > 0.0) {
                return Err(Error::NonFinite(
                    "empirical variance is zero; the model fits the data exactly".into(),
                ));
            }
            Ok(est.value)
        }
    }
}

/// Exact collapsed log marginal likelihood of `model`. In `Estimate` mode
/// the empirical `σ̂²` of the model itself is plugged in.
pub fn log_marginal(design: &Design, model: &ModelId, prior: &PriorConfig) -> Result<f64> {
    check_model(design, model, prior)?;
    let sigma2 = plug_in_sigma2(design, model, prior)?;
    let lm = log_marginal_at(design, model, prior, sigma2)?;
    if !lm.is_finite() {
        return Err(Error::NonFinite("log marginal likelihood".into()));
    }
    Ok(lm)
}

/// Regression evidence with `σ²` integrated against `π(σ²) ∝ 1/σ²`:
/// `−(n/2) log 2π + Σ_j ½ log(det S / det(X_j'X_j+S)) + log Γ(n/2) − (n/2) log(Q/2)`
/// with `Q = Σ_j quad_j`.
pub fn log_marginal_jeffreys(design: &Design, model: &ModelId, prior: &PriorConfig) -> Result<f64> {
    check_model(design, model, prior)?;
    if prior.kind != ModelKind::Regression {
        return Err(Error::Config(
            "closed-form variance integration applies to the regression model".into(),
        ));
    }
    let mut n_total = 0usize;
    let mut half = 0.0;
    let mut q = 0.0;
    for rows in model.segmentation.blocks() {
        let (n, h, quad) = block_terms(design, rows, model, prior)?;
        n_total += n;
        half += h;
        q += quad;
    }
    let nh = 0.5 * n_total as f64;
    let value = -nh * LN_2PI + half + ln_gamma(nh) - nh * (0.5 * q).ln();
    if !value.is_finite() {
        return Err(Error::NonFinite("variance-integrated marginal".into()));
    }
    Ok(value)
}

/// `Σ_i log Bern(I^y_i; p_n) + Σ_m log Bern(I^β_m; p̃_m)`.
pub fn log_prior(model: &ModelId, prior: &PriorConfig) -> f64 {
    let n = model.segmentation.len();
    let p = prior.changepoint_prob;
    let cp: f64 = model.segmentation.indicators()[1..]
        .iter()
        .map(|&b| bernoulli_logpmf(b, p))
        .sum();
    let cov: f64 = model
        .mask
        .as_slice()
        .iter()
        .enumerate()
        .map(|(m, &b)| bernoulli_logpmf(b, prior.inclusion_prob(m, n)))
        .sum();
    cp + cov
}

/// `log BF(a, b) = log L(y | a) − log L(y | b)`.
pub fn log_bayes_factor(design: &Design, a: &ModelId, b: &ModelId, prior: &PriorConfig) -> Result<f64> {
    if a == b {
        check_model(design, a, prior)?;
        return Ok(0.0);
    }
    Ok(log_marginal(design, a, prior)? - log_marginal(design, b, prior)?)
}

/// Log ratio of posterior probabilities of `a` and `b`.
pub fn log_posterior_ratio(design: &Design, a: &ModelId, b: &ModelId, prior: &PriorConfig) -> Result<f64> {
    if a == b {
        check_model(design, a, prior)?;
        return Ok(0.0);
    }
    Ok(log_bayes_factor(design, a, b, prior)? + log_prior(a, prior) - log_prior(b, prior))
}
