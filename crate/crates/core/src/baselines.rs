//! Penalized-cost segmentation baselines: PELT and the unpruned optimal
//! partitioning recursion it must agree with.
//!
//! The segment cost is the Gaussian negative log-likelihood with the block
//! MLE mean, expressed in squared-error units (`2σ² × NLL` up to a constant,
//! i.e. the block residual sum of squares). A penalty of `2σ² log n` per
//! changepoint is then the usual BIC-style choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and MLE variance of one detected block (1-based inclusive indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub start: usize,
    pub end: usize,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeltResult {
    /// 1-based indices where new blocks start.
    pub changepoints: Vec<usize>,
    /// `Σ cost + penalty × #changepoints`.
    pub total_cost: f64,
    pub penalty: f64,
    pub min_seg: usize,
    pub segment_params: Vec<SegmentParams>,
}

struct SquaredError {
    s1: Vec<f64>,
    s2: Vec<f64>,
    center: f64,
}

impl SquaredError {
    fn new(y: &[f64]) -> Self {
        // Centering keeps the prefix sums well conditioned under shifts.
        let center = y.iter().sum::<f64>() / y.len() as f64;
        let mut s1 = vec![0.0; y.len() + 1];
        let mut s2 = vec![0.0; y.len() + 1];
        for (i, v) in y.iter().enumerate() {
            let c = v - center;
            s1[i + 1] = s1[i] + c;
            s2[i + 1] = s2[i] + c * c;
        }
        Self { s1, s2, center }
    }

    /// Residual sum of squares of `y[a..b]` about its mean.
    #[inline]
    fn cost(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let s = self.s1[b] - self.s1[a];
        (self.s2[b] - self.s2[a] - s * s / n).max(0.0)
    }

    /// Objective values closer than this count as ties. Bounded below by
    /// every `|F(t)|`, so one absolute band serves the whole recursion.
    fn tie_tolerance(&self, penalty: f64, min_seg: usize) -> f64 {
        let n = self.s1.len() - 1;
        1e-10 * (1.0 + self.cost(0, n) + penalty * (n / min_seg) as f64)
    }

    fn mean(&self, a: usize, b: usize) -> f64 {
        self.center + (self.s1[b] - self.s1[a]) / (b - a) as f64
    }
}

fn check_inputs(y: &[f64], penalty: f64, min_seg: usize) -> Result<()> {
    if min_seg == 0 {
        return Err(Error::Config("min_seg must be at least 1".into()));
    }
    if y.len() < 2 * min_seg {
        return Err(Error::Config(format!(
            "need at least {} observations for min_seg {min_seg}, got {}",
            2 * min_seg,
            y.len()
        )));
    }
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(Error::Config(format!("penalty must be non-negative, got {penalty}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input series".into()));
    }
    Ok(())
}

/// Earliest start (in ascending `starts`) whose objective is within `tol` of
/// the minimum. Rounding noise from shifting `y` cannot flip such ties.
fn best_start(f: &[f64], cost: &SquaredError, starts: &[usize], t: usize, penalty: f64, tol: f64) -> (f64, usize) {
    let value = |s: usize| f[s] + cost.cost(s, t) + penalty;
    let min = starts.iter().map(|&s| value(s)).fold(f64::INFINITY, f64::min);
    starts
        .iter()
        .map(|&s| (value(s), s))
        .find(|(v, _)| *v <= min + tol)
        .unwrap_or((f64::INFINITY, 0))
}

fn backtrack(cost: &SquaredError, last: &[usize], n: usize, penalty: f64, min_seg: usize, best: f64) -> PeltResult {
    let mut bounds = vec![n];
    let mut t = n;
    while t > 0 {
        t = last[t];
        bounds.push(t);
    }
    bounds.reverse();
    let segment_params = bounds
        .windows(2)
        .map(|w| SegmentParams {
            start: w[0] + 1,
            end: w[1],
            mean: cost.mean(w[0], w[1]),
            variance: cost.cost(w[0], w[1]) / (w[1] - w[0]) as f64,
        })
        .collect();
    PeltResult {
        changepoints: bounds[1..bounds.len() - 1].iter().map(|b| b + 1).collect(),
        total_cost: best,
        penalty,
        min_seg,
        segment_params,
    }
}

/// Exact minimizer by the `O(n²)` optimal-partitioning recursion. Near-ties go
/// to the earliest last changepoint.
pub fn optimal_partition_dp(y: &[f64], penalty: f64, min_seg: usize) -> Result<PeltResult> {
    check_inputs(y, penalty, min_seg)?;
    let n = y.len();
    let cost = SquaredError::new(y);
    let mut f = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -penalty;
    let tol = cost.tie_tolerance(penalty, min_seg);
    for t in min_seg..=n {
        let starts: Vec<usize> = std::iter::once(0)
            .chain(min_seg..=t.saturating_sub(min_seg))
            .filter(|&s| f[s].is_finite())
            .collect();
        (f[t], last[t]) = best_start(&f, &cost, &starts, t, penalty, tol);
    }
    Ok(backtrack(&cost, &last, n, penalty, min_seg, f[n]))
}

/// Pruned exact linear time segmentation. Returns the same optimum as
/// [`optimal_partition_dp`]; a candidate is dropped only once it is strictly
/// worse than the newer start for every admissible future end.
pub fn pelt_detect(y: &[f64], penalty: f64, min_seg: usize) -> Result<PeltResult> {
    check_inputs(y, penalty, min_seg)?;
    let n = y.len();
    let cost = SquaredError::new(y);
    let mut f = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -penalty;
    let tol = cost.tie_tolerance(penalty, min_seg);
    // Ten times the tie band, so a pruned start can never be a near-tie later.
    let margin = 10.0 * tol;
    let mut candidates: Vec<usize> = vec![0];
    let mut pending: std::collections::VecDeque<(usize, usize)> = Default::default();
    for t in min_seg..=n {
        while pending.front().is_some_and(|(at, _)| *at <= t) {
            let (_, s) = pending.pop_front().unwrap();
            candidates.retain(|c| *c != s);
        }
        let fresh = t - min_seg;
        if fresh >= min_seg && f[fresh].is_finite() {
            candidates.push(fresh);
        }
        (f[t], last[t]) = best_start(&f, &cost, &candidates, t, penalty, tol);
        for &s in &candidates {
            if f[s] + cost.cost(s, t) > f[t] + margin {
                pending.push_back((t + min_seg, s));
            }
        }
    }
    Ok(backtrack(&cost, &last, n, penalty, min_seg, f[n]))
}

/// Noise variance from the median absolute deviation of first differences.
pub fn mad_noise_variance(y: &[f64]) -> Result<f64> {
    if y.len() < 3 {
        return Err(Error::DegenerateInput("need at least 3 observations".into()));
    }
    let mut d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    };
    let med = median(&mut d);
    let mut dev: Vec<f64> = d.iter().map(|x| (x - med).abs()).collect();
    let sigma = 1.482_602_218_505_602 * median(&mut dev) / std::f64::consts::SQRT_2;
    if sigma > 0.0 {
        Ok(sigma * sigma)
    } else {
        Err(Error::DegenerateInput(
            "first differences have zero spread; variance is not estimable".into(),
        ))
    }
}

/// Default penalty `2σ² log n` with `σ²` supplied or MAD-estimated.
/// Returns `(penalty, σ², fell_back_to_unit_variance)`.
pub fn default_penalty(y: &[f64], sigma2: Option<f64>) -> (f64, f64, bool) {
    let (s2, fallback) = match sigma2 {
        Some(s) => (s, false),
        None => match mad_noise_variance(y) {
            Ok(s) => (s, false),
            Err(_) => (1.0, true),
        },
    };
    (2.0 * s2 * (y.len() as f64).ln(), s2, fallback)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_no_changepoints() {
        let y = vec![3.0; 20];
        for pen in [0.1, 1.0, 10.0] {
            assert!(pelt_detect(&y, pen, 1).unwrap().changepoints.is_empty());
            assert!(optimal_partition_dp(&y, pen, 1).unwrap().changepoints.is_empty());
        }
    }

    #[test]
    fn step_is_found_at_four() {
        let y = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let pen = 2.0 * 6f64.ln();
        let r = pelt_detect(&y, pen, 1).unwrap();
        assert_eq!(r.changepoints, vec![4]);
        assert!((r.total_cost - pen).abs() < 1e-12);
        assert_eq!(r.segment_params.len(), 2);
        assert_eq!(r.segment_params[1].mean, 10.0);
    }

    #[test]
    fn minimal_length_split_at_midpoint() {
        let y = [0.0, 0.1, 0.0, 100.0, 100.2, 100.0];
        let r = optimal_partition_dp(&y, 0.0, 3).unwrap();
        assert_eq!(r.changepoints, vec![4]);
        assert_eq!(pelt_detect(&y, 0.0, 3).unwrap().changepoints, vec![4]);
    }

    #[test]
    fn constant_series_variance_is_degenerate() {
        assert!(matches!(mad_noise_variance(&[1.0; 10]), Err(Error::DegenerateInput(_))));
        let (pen, s2, fallback) = default_penalty(&[1.0; 10], None);
        assert!(fallback);
        assert_eq!(s2, 1.0);
        assert!((pen - 2.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_input() {
        assert!(pelt_detect(&[1.0, 2.0, 3.0], 1.0, 2).is_err());
        assert!(pelt_detect(&[1.0, 2.0], -1.0, 1).is_err());
    }
}
