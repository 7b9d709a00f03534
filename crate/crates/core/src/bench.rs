//! Empirical consistency of Bayes factors: for growing `n`, simulate from a
//! changing regression, compare a wrong model to the truth and track the mean
//! log Bayes factor.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Design;
use crate::error::{Error, Result};
use crate::model::{
    log_bayes_factor, log_posterior_ratio, InclusionMask, ModelId, ModelKind, PriorConfig, Sigma2,
};
use crate::oracle::log_sum_exp;
use crate::simgen::RegressionDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Second true changepoint dropped; known unit variance.
    WrongCount,
    /// Both changepoints moved right by `ε_n n` observations.
    ShiftedEps,
    /// Covariate 2 dropped from the true mask.
    WrongCovariates,
    /// Wrong count with the plug-in variance estimate.
    EstSigma,
    /// Wrong count, plug-in variance, unequal block noise levels.
    MisspecVar,
    /// Log posterior ratio summed over all single-covariate perturbations of
    /// the true mask.
    VarSelect,
    /// Alternative equals the truth.
    Identity,
}

impl Scenario {
    /// The five scenarios whose trend is checked.
    pub const CORE: [Scenario; 5] = [
        Scenario::WrongCount,
        Scenario::ShiftedEps,
        Scenario::WrongCovariates,
        Scenario::EstSigma,
        Scenario::MisspecVar,
    ];

    pub const ALL: [Scenario; 7] = [
        Scenario::WrongCount,
        Scenario::ShiftedEps,
        Scenario::WrongCovariates,
        Scenario::EstSigma,
        Scenario::MisspecVar,
        Scenario::VarSelect,
        Scenario::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::WrongCount => "wrong-count",
            Scenario::ShiftedEps => "shifted-eps",
            Scenario::WrongCovariates => "wrong-covariates",
            Scenario::EstSigma => "est-sigma",
            Scenario::MisspecVar => "misspec-var",
            Scenario::VarSelect => "var-select",
            Scenario::Identity => "identity",
        }
    }

    fn noise_sd(self) -> [f64; 3] {
        match self {
            Scenario::MisspecVar => [2.0, 0.5, 1.0],
            _ => [1.0; 3],
        }
    }

    fn sigma2(self) -> Sigma2 {
        match self {
            Scenario::EstSigma | Scenario::MisspecVar => Sigma2::Estimate,
            _ => Sigma2::Known(1.0),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// How far the shifted-eps alternative moves each changepoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftRule {
    /// `⌈c (ln n)²⌉` observations, i.e. `ε_n = c (ln n)² / n`.
    LogSquared(f64),
    /// A fixed number of observations.
    Fixed(usize),
}

impl ShiftRule {
    pub fn shift(self, n: usize) -> usize {
        match self {
            ShiftRule::LogSquared(c) => (c * (n as f64).ln().powi(2)).ceil() as usize,
            ShiftRule::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Number of candidate covariates (at least 12).
    pub p: usize,
    pub shift: ShiftRule,
    pub tau2: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 200, 400, 800],
            replicates: 20,
            seed: 0,
            p: 15,
            shift: ShiftRule::LogSquared(0.5),
            tau2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: Scenario,
    pub n: usize,
    pub replicate: usize,
    pub log_bf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub scenario: Scenario,
    pub n: usize,
    pub mean_log_bf: f64,
    pub sd_log_bf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
}

impl BenchResult {
    pub fn means(&self, scenario: Scenario) -> Vec<f64> {
        self.summary
            .iter()
            .filter(|s| s.scenario == scenario)
            .map(|s| s.mean_log_bf)
            .collect()
    }

    /// Whether the per-`n` mean strictly decreases along the grid.
    pub fn strictly_decreasing(&self, scenario: Scenario) -> bool {
        self.means(scenario).windows(2).all(|w| w[1] < w[0])
    }

    pub fn write_long_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("scenario,n,replicate,log_bf\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.scenario, r.n, r.replicate, r.log_bf));
        }
        write_file(path, &out)
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("scenario,n,mean_log_bf,sd_log_bf\n");
        for s in &self.summary {
            out.push_str(&format!("{},{},{},{}\n", s.scenario, s.n, s.mean_log_bf, s.sd_log_bf));
        }
        write_file(path, &out)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn true_mask(design: &RegressionDesign) -> Result<InclusionMask> {
    let idx: Vec<usize> = design.active_set().iter().map(|j| j - 1).collect();
    InclusionMask::from_indices(design.p, &idx)
}

fn replicate_rng(seed: u64, scenario: Scenario, n: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((scenario as u64) << 56) ^ ((n as u64) << 24) ^ rep as u64);
    rng
}

/// `log BF(alternative, truth)` for one simulated replicate.
pub fn replicate_log_bf(scenario: Scenario, n: usize, rep: usize, config: &BenchConfig) -> Result<f64> {
    let truth_design = RegressionDesign::scaled(n, config.p, scenario.noise_sd());
    let mut rng = replicate_rng(config.seed, scenario, n, rep);
    let (data, _) = truth_design.generate_with(&mut rng, config.seed);
    let design: Design = data.design();
    let prior = PriorConfig {
        kind: ModelKind::Regression,
        sigma2: scenario.sigma2(),
        tau2: config.tau2,
        sample_tau2: false,
        max_covariates: config.p,
        ..PriorConfig::defaults_for(&design)
    };
    let cps = truth_design.changepoints();
    let mask = true_mask(&truth_design)?;
    let truth = ModelId::new(design.segmentation_from_changepoints(&cps)?, mask.clone());
    let alt = match scenario {
        Scenario::WrongCount | Scenario::EstSigma | Scenario::MisspecVar => {
            ModelId::new(design.segmentation_from_changepoints(&cps[..1])?, mask)
        }
        Scenario::ShiftedEps => {
            let s = config.shift.shift(n);
            let moved: Vec<usize> = cps.iter().map(|c| c + s).collect();
            if moved.last().is_some_and(|&c| c > n) || moved.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("shift {s} does not fit n = {n}")));
            }
            ModelId::new(design.segmentation_from_changepoints(&moved)?, mask)
        }
        Scenario::WrongCovariates => {
            let mut m = mask.indices();
            m.retain(|&j| j != 1);
            ModelId::new(truth.segmentation.clone(), InclusionMask::from_indices(config.p, &m)?)
        }
        Scenario::VarSelect => {
            let mut terms = Vec::with_capacity(config.p);
            for j in 0..config.p {
                let mut m = mask.indices();
                if mask.contains(j) {
                    m.retain(|&k| k != j);
                } else {
                    m.push(j);
                }
                let alt = ModelId::new(truth.segmentation.clone(), InclusionMask::from_indices(config.p, &m)?);
                terms.push(log_posterior_ratio(&design, &alt, &truth, &prior)?);
            }
            return Ok(log_sum_exp(terms));
        }
        Scenario::Identity => truth.clone(),
    };
    log_bayes_factor(&design, &alt, &truth, &prior)
}

/// Runs every `(scenario, n, replicate)` cell in parallel; results are
/// ordered and independent of the thread count.
pub fn run_bench(scenarios: &[Scenario], config: &BenchConfig) -> Result<BenchResult> {
    if config.replicates == 0 || config.n_grid.is_empty() {
        return Err(Error::Config("need at least one n and one replicate".into()));
    }
    if config.p < 12 {
        return Err(Error::Config("bench design needs p >= 12".into()));
    }
    if let Some(&n) = config.n_grid.iter().find(|&&n| n < 20) {
        return Err(Error::Config(format!("n = {n} is too small for the bench design")));
    }
    let cells: Vec<(Scenario, usize, usize)> = scenarios
        .iter()
        .flat_map(|&s| {
            config
                .n_grid
                .iter()
                .flat_map(move |&n| (0..config.replicates).map(move |r| (s, n, r)))
        })
        .collect();
    let rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|&(scenario, n, replicate)| {
            Ok(BenchRow {
                scenario,
                n,
                replicate,
                log_bf: replicate_log_bf(scenario, n, replicate, config)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for &scenario in scenarios {
        for &n in &config.n_grid {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.scenario == scenario && r.n == n)
                .map(|r| r.log_bf)
                .collect();
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            summary.push(BenchSummary {
                scenario,
                n,
                mean_log_bf: mean,
                sd_log_bf: sd,
            });
        }
    }
    Ok(BenchResult {
        config: config.clone(),
        rows,
        summary,
    })
}
