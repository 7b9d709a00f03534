//! Run reports (JSON) and plot-data CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::PeltResult;
use crate::data::DatasetMeta;
use crate::error::{Error, Result};
use crate::model::{ModelId, PriorConfig};
use crate::oracle::ExactPosterior;
use crate::sampler::{PosteriorSummary, SamplerConfig};

/// Where the data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input: Option<String>,
    pub generator: Option<String>,
    pub data_seed: Option<u64>,
    pub n: usize,
    pub p: usize,
    pub ar_lag: bool,
    pub meta: DatasetMeta,
}

/// The fully resolved configuration after defaults, file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub prior: PriorConfig,
    pub sampler: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeltReport {
    pub result: PeltResult,
    /// Variance used for the default penalty, if one was estimated.
    pub noise_variance: Option<f64>,
    pub variance_fallback: bool,
}

/// Largest absolute gaps between sampled and exact marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub sampler_samples: usize,
    pub max_abs_cp_prob: f64,
    pub max_abs_pip: f64,
    pub max_abs_partition_count: f64,
    pub sampler: PosteriorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_models: usize,
    pub log_normalizer: f64,
    pub cp_prob: Vec<f64>,
    pub pip: Vec<f64>,
    pub partition_count_dist: BTreeMap<usize, f64>,
    pub model_size_dist: BTreeMap<usize, f64>,
    pub map_model: ModelId,
    pub comparison: Option<OracleComparison>,
}

impl OracleReport {
    pub fn new(exact: &ExactPosterior, sampler: Option<PosteriorSummary>) -> Self {
        let comparison = sampler.map(|s| {
            let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let mut keys: Vec<usize> = exact.partition_count_dist.keys().copied().collect();
            keys.extend(s.partition_count_dist.keys());
            let parts = keys
                .iter()
                .map(|k| {
                    let a = exact.partition_count_dist.get(k).copied().unwrap_or(0.0);
                    let b = s.partition_count_dist.get(k).copied().unwrap_or(0.0);
                    (a - b).abs()
                })
                .fold(0.0, f64::max);
            OracleComparison {
                sampler_samples: s.n_samples,
                max_abs_cp_prob: dist(&exact.cp_prob, &s.cp_prob),
                max_abs_pip: dist(&exact.pip, &s.pip),
                max_abs_partition_count: parts,
                sampler: s,
            }
        });
        Self {
            n_models: exact.table.len(),
            log_normalizer: exact.log_normalizer,
            cp_prob: exact.cp_prob.clone(),
            pip: exact.pip.clone(),
            partition_count_dist: exact.partition_count_dist.clone(),
            model_size_dist: exact.model_size_dist.clone(),
            map_model: exact.map_model.clone(),
            comparison,
        }
    }
}

/// Everything one command produced, with enough context to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub provenance: Provenance,
    pub config: Option<ResolvedConfig>,
    pub summary: Option<PosteriorSummary>,
    pub pelt: Option<PeltReport>,
    pub oracle: Option<OracleReport>,
    /// Wall-clock seconds per phase. Excluded from determinism checks.
    pub timings: BTreeMap<String, f64>,
}

fn probabilities_ok<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|p| (0.0..=1.0).contains(p))
}

impl RunReport {
    pub fn new(command: &str, seed: Option<u64>, provenance: Provenance) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            provenance,
            config: None,
            summary: None,
            pelt: None,
            oracle: None,
            timings: BTreeMap::new(),
        }
    }

    /// Whether every probability field lies in `[0, 1]`.
    pub fn probabilities_in_range(&self) -> bool {
        let s = self.summary.as_ref().is_none_or(|s| {
            probabilities_ok(&s.cp_prob)
                && probabilities_ok(&s.pip)
                && probabilities_ok(s.partition_count_dist.values())
                && probabilities_ok(s.model_size_dist.values())
        });
        let o = self.oracle.as_ref().is_none_or(|o| {
            probabilities_ok(&o.cp_prob) && probabilities_ok(&o.pip) && probabilities_ok(o.partition_count_dist.values())
        });
        s && o
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `index,cp_prob` for every original index.
pub fn write_cp_prob_csv(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut s = String::from("index,cp_prob\n");
    for (i, p) in summary.cp_prob.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, p);
    }
    write_text(path, &s)
}

/// `index,y,fitted_mean`.
pub fn write_fitted_csv(summary: &PosteriorSummary, y: &[f64], path: &Path) -> Result<()> {
    if y.len() != summary.fitted_mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} observations but {} fitted values",
            y.len(),
            summary.fitted_mean.len()
        )));
    }
    let mut s = String::from("index,y,fitted_mean\n");
    for (i, (a, b)) in y.iter().zip(&summary.fitted_mean).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, a, b);
    }
    write_text(path, &s)
}

/// `n_blocks,probability`.
pub fn write_partition_csv(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut s = String::from("n_blocks,probability\n");
    for (k, p) in &summary.partition_count_dist {
        let _ = writeln!(s, "{k},{p}");
    }
    write_text(path, &s)
}

/// `covariate,pip`.
pub fn write_pip_csv(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut s = String::from("covariate,pip\n");
    for (name, p) in summary.covariate_names.iter().zip(&summary.pip) {
        let _ = writeln!(s, "{name},{p}");
    }
    write_text(path, &s)
}

/// `start,end,mean,variance` of each PELT block.
pub fn write_pelt_segments_csv(result: &PeltResult, path: &Path) -> Result<()> {
    let mut s = String::from("start,end,mean,variance\n");
    for seg in &result.segment_params {
        let _ = writeln!(s, "{},{},{},{}", seg.start, seg.end, seg.mean, seg.variance);
    }
    write_text(path, &s)
}

/// Writes all four posterior plot files into `dir` and returns their names.
pub fn write_plot_data(summary: &PosteriorSummary, y: &[f64], dir: &Path) -> Result<Vec<String>> {
    let files = ["cp_prob.csv", "fitted.csv", "partition_counts.csv", "pip.csv"];
    write_cp_prob_csv(summary, &dir.join(files[0]))?;
    write_fitted_csv(summary, y, &dir.join(files[1]))?;
    write_partition_csv(summary, &dir.join(files[2]))?;
    write_pip_csv(summary, &dir.join(files[3]))?;
    Ok(files.iter().map(|f| f.to_string()).collect())
}
