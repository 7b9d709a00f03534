//! Regularized least squares on small dense blocks.
//!
//! Every marginal-likelihood evaluation in the crate reduces to the
//! sufficient statistics of one block, `X'X`, `X'y` and `y'y`, plus a
//! diagonal prior precision `S`. The routines here factor `X'X + S` with a
//! Cholesky decomposition and read the log-determinant off its diagonal.

use nalgebra::{DMatrix, DVector};

use crate::data::Design;
use crate::error::{Error, Result};
use crate::model::{InclusionMask, Segmentation};

/// Relative pivot tolerance for the Cholesky factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major `dim × dim` matrix `a`. Fails when a pivot drops
    /// to `PIVOT_TOLERANCE × max diag(a)` or below.
    pub fn factor(a: &[f64], dim: usize) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim}x{dim} matrix, got {} entries",
                a.len()
            )));
        }
        let max_diag = (0..dim).map(|i| a[i * dim + i]).fold(0.0_f64, f64::max);
        let tolerance = PIVOT_TOLERANCE * max_diag;
        let mut lower = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut d = a[j * dim + j];
            for m in 0..j {
                d -= lower[j * dim + m] * lower[j * dim + m];
            }
            if !(d > tolerance) {
                return Err(Error::SingularSystem {
                    column: j,
                    pivot: d,
                    tolerance,
                });
            }
            let ljj = d.sqrt();
            lower[j * dim + j] = ljj;
            for i in (j + 1)..dim {
                let mut s = a[i * dim + j];
                for m in 0..j {
                    s -= lower[i * dim + m] * lower[j * dim + m];
                }
                lower[i * dim + j] = s / ljj;
            }
        }
        Ok(Self { dim, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log det(A) = 2 Σ log L_jj`.
    pub fn logdet(&self) -> f64 {
        (0..self.dim)
            .map(|j| self.lower[j * self.dim + j].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.dim;
        let mut z = b.to_vec();
        for i in 0..k {
            let mut s = z[i];
            for m in 0..i {
                s -= self.lower[i * k + m] * z[m];
            }
            z[i] = s / self.lower[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = z[i];
            for m in (i + 1)..k {
                s -= self.lower[m * k + i] * z[m];
            }
            z[i] = s / self.lower[i * k + i];
        }
        z
    }
}

/// Responses and active design columns for one partition block.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl SegmentData {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::DimensionMismatch("segment has no observations".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self { y, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }
}

/// Result of a ridge-regularized fit on one block.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFit {
    pub beta_hat: DVector<f64>,
    /// `‖y − X β̂‖²`.
    pub rss: f64,
    /// `log det(S)`; `-inf` when some prior precision is zero.
    pub logdet_prior: f64,
    /// `log det(X'X + S)`.
    pub logdet_posterior: f64,
    /// `y'y − y'X (X'X + S)⁻¹ X'y`.
    pub quad: f64,
}

/// Fit computed from sufficient statistics only (no residuals).
#[derive(Debug, Clone, PartialEq)]
pub struct GramFit {
    pub beta_hat: Vec<f64>,
    pub logdet_prior: f64,
    pub logdet_posterior: f64,
    pub quad: f64,
}

fn check_precision(prior_precision: &[f64], k: usize) -> Result<()> {
    if prior_precision.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "prior precision has {} entries for {k} columns",
            prior_precision.len()
        )));
    }
    if let Some(bad) = prior_precision.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidModel(format!(
            "prior precision entries must be non-negative, got {bad}"
        )));
    }
    Ok(())
}

/// Solves `(G + S) β = b` given the row-major Gram `G = X'X`, `b = X'y` and
/// `y'y`.
pub fn fit_gram(gram: &[f64], xty: &[f64], yty: f64, prior_precision: &[f64]) -> Result<GramFit> {
    let k = xty.len();
    check_precision(prior_precision, k)?;
    if gram.len() != k * k {
        return Err(Error::DimensionMismatch(format!(
            "gram has {} entries for {k} columns",
            gram.len()
        )));
    }
    let logdet_prior = prior_precision.iter().map(|s| s.ln()).sum::<f64>();
    if k == 0 {
        return Ok(GramFit {
            beta_hat: Vec::new(),
            logdet_prior: 0.0,
            logdet_posterior: 0.0,
            quad: yty.max(0.0),
        });
    }
    let mut a = gram.to_vec();
    for (j, s) in prior_precision.iter().enumerate() {
        a[j * k + j] += s;
    }
    let chol = Cholesky::factor(&a, k)?;
    let beta_hat = chol.solve(xty);
    let explained: f64 = xty.iter().zip(&beta_hat).map(|(b, x)| b * x).sum();
    Ok(GramFit {
        beta_hat,
        logdet_prior,
        logdet_posterior: chol.logdet(),
        quad: (yty - explained).max(0.0),
    })
}

fn gram_of(x: &DMatrix<f64>) -> Vec<f64> {
    let k = x.ncols();
    let g = x.transpose() * x;
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = g[(i, j)];
        }
    }
    out
}

/// Ridge fit of one block: solves `(X'X + S) β = X'y` through a Cholesky
/// factorization of `X'X + S`, with `S = diag(prior_precision)`.
pub fn fit_regularized_ls(seg: &SegmentData, prior_precision: &[f64]) -> Result<SegmentFit> {
    let k = seg.ncols();
    check_precision(prior_precision, k)?;
    let xty: Vec<f64> = (seg.x.transpose() * &seg.y).iter().copied().collect();
    let yty = seg.y.dot(&seg.y);
    let fit = fit_gram(&gram_of(&seg.x), &xty, yty, prior_precision)?;
    let beta_hat = DVector::from_vec(fit.beta_hat);
    let resid = &seg.y - &seg.x * &beta_hat;
    Ok(SegmentFit {
        beta_hat,
        rss: resid.dot(&resid),
        logdet_prior: fit.logdet_prior,
        logdet_posterior: fit.logdet_posterior,
        quad: fit.quad,
    })
}

/// `log det(X'X + S)` read from the Cholesky diagonal.
pub fn logdet_gram(x: &DMatrix<f64>, s: &[f64]) -> Result<f64> {
    let k = x.ncols();
    check_precision(s, k)?;
    let mut a = gram_of(x);
    for (j, v) in s.iter().enumerate() {
        a[j * k + j] += v;
    }
    Ok(Cholesky::factor(&a, k)?.logdet())
}

/// Pooled residual variance `n⁻¹ Σ_j ‖Y_j − Ŷ_j‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma2Estimate {
    pub value: f64,
    /// Set when at least one block was rank deficient and was refit with the
    /// ridge precision `1/τ²`.
    pub ridge_fallback: bool,
}

/// Empirical noise variance from block-wise least-squares fits under
/// `mask`. Rank-deficient blocks are refit with precision `1/tau2`.
pub fn empirical_sigma2(
    design: &Design,
    segmentation: &Segmentation,
    mask: &InclusionMask,
    tau2: f64,
) -> Result<Sigma2Estimate> {
    if segmentation.len() != design.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation covers {} rows, design has {}",
            segmentation.len(),
            design.n_rows()
        )));
    }
    let mut total = 0.0;
    let mut ridge_fallback = false;
    for block in segmentation.blocks() {
        let seg = design.segment(block.clone(), mask)?;
        let k = seg.ncols();
        let rss = match fit_regularized_ls(&seg, &vec![0.0; k]) {
            Ok(fit) => fit.rss,
            Err(Error::SingularSystem { .. }) => {
                ridge_fallback = true;
                fit_regularized_ls(&seg, &vec![1.0 / tau2; k])?.rss
            }
            Err(e) => return Err(e),
        };
        total += rss;
    }
    Ok(Sigma2Estimate {
        value: total / design.n_rows() as f64,
        ridge_fallback,
    })
}
