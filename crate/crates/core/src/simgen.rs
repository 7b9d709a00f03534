//! Seeded generators for the three reference simulation designs, a scalable
//! variant of the regression design, and CSV input/output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Data-generating truth stored next to a simulated dataset.
///
/// Covariate numbers are 1-based (`2` is column `x2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    /// 1-based indices where new blocks start.
    pub true_changepoints: Vec<usize>,
    /// Per-index mean for the piecewise-constant design.
    pub true_theta: Option<Vec<f64>>,
    pub segment_means: Vec<f64>,
    pub true_beta_per_segment: Vec<BTreeMap<usize, f64>>,
    pub true_sigma_per_segment: Vec<f64>,
    pub true_active_set: Vec<usize>,
    pub includes_lag: bool,
    pub rho: Option<f64>,
    /// Indices whose value depends on the arbitrary recursion start.
    pub transient: Vec<usize>,
}

impl GroundTruth {
    pub fn n_segments(&self) -> usize {
        self.true_changepoints.len() + 1
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

const EX1_MEANS: [f64; 7] = [-0.18, 0.08, 1.07, -0.53, 0.16, -0.69, -0.16];
const EX1_ENDS: [usize; 7] = [138, 225, 242, 299, 308, 333, 497];
const EX1_NOISE_VAR: f64 = 0.04;

fn starts_from_ends(ends: &[usize]) -> Vec<usize> {
    ends[..ends.len() - 1].iter().map(|e| e + 1).collect()
}

/// Piecewise-constant mean with seven blocks and noise variance 0.04.
pub fn gen_example1(seed: u64) -> (Dataset, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = EX1_NOISE_VAR.sqrt();
    let mut theta = Vec::with_capacity(497);
    let mut start = 0;
    for (&end, &m) in EX1_ENDS.iter().zip(&EX1_MEANS) {
        theta.extend(std::iter::repeat_n(m, end - start));
        start = end;
    }
    let y: Vec<f64> = theta
        .iter()
        .map(|t| t + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut data = Dataset::new(y, None).expect("valid generated data");
    data.meta.source = format!("example1 seed {seed}");
    let truth = GroundTruth {
        generator: "example1".into(),
        seed,
        n: 497,
        p: 0,
        true_changepoints: starts_from_ends(&EX1_ENDS),
        true_theta: Some(theta),
        segment_means: EX1_MEANS.to_vec(),
        true_beta_per_segment: vec![BTreeMap::new(); 7],
        true_sigma_per_segment: vec![sd; 7],
        true_active_set: Vec::new(),
        includes_lag: false,
        rho: None,
        transient: Vec::new(),
    };
    (data, truth)
}

/// A changing linear regression with i.i.d. standard normal covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDesign {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Inclusive 1-based block ends; the last equals `n`.
    pub ends: Vec<usize>,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<BTreeMap<usize, f64>>,
    pub noise_sd: Vec<f64>,
    /// AR(1) coefficient on `y_{i-1}` with `y_0 = 0`.
    pub rho: Option<f64>,
}

fn coefs(pairs: &[(usize, f64)]) -> BTreeMap<usize, f64> {
    pairs.iter().copied().collect()
}

impl RegressionDesign {
    pub fn example2() -> Self {
        Self::scaled(250, 250, [1.2, 0.8, 1.0])
    }

    pub fn example3() -> Self {
        Self {
            name: "example3".into(),
            n: 300,
            p: 250,
            ends: vec![90, 210, 300],
            intercepts: vec![3.0, 1.0, -2.0],
            coefficients: vec![
                coefs(&[(2, 1.0), (12, 3.0)]),
                coefs(&[(2, 2.0)]),
                coefs(&[(2, 1.0), (3, -1.0)]),
            ],
            noise_sd: vec![1.2, 0.8, 1.0],
            rho: Some(0.5),
        }
    }

    /// The second reference design at arbitrary `n` and `p ≥ 12`, with
    /// blocks ending at `⌊0.3n⌋`, `⌊0.7n⌋` and `n`.
    pub fn scaled(n: usize, p: usize, noise_sd: [f64; 3]) -> Self {
        assert!(p >= 12, "the design uses covariate 12");
        assert!(n >= 10, "need at least 10 observations");
        let e1 = (3 * n) / 10;
        let e2 = (7 * n) / 10;
        Self {
            name: if n == 250 && p == 250 && noise_sd == [1.2, 0.8, 1.0] {
                "example2".into()
            } else {
                format!("regression_n{n}_p{p}")
            },
            n,
            p,
            ends: vec![e1, e2, n],
            intercepts: vec![3.0, 1.0, -2.5],
            coefficients: vec![
                coefs(&[(2, 1.0), (12, 2.0)]),
                coefs(&[(2, 2.0)]),
                coefs(&[(2, 2.0), (3, -1.0)]),
            ],
            noise_sd: noise_sd.to_vec(),
            rho: None,
        }
    }

    pub fn changepoints(&self) -> Vec<usize> {
        starts_from_ends(&self.ends)
    }

    pub fn active_set(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.coefficients.iter().flat_map(|c| c.keys().copied()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Draws `X` row by row, then the noise, from one seeded stream.
    pub fn generate(&self, seed: u64) -> (Dataset, GroundTruth) {
        self.generate_with(&mut ChaCha8Rng::seed_from_u64(seed), seed)
    }

    pub fn generate_with<R: Rng + ?Sized>(&self, rng: &mut R, seed: u64) -> (Dataset, GroundTruth) {
        let (n, p) = (self.n, self.p);
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                x[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let mut y = Vec::with_capacity(n);
        let mut prev = 0.0;
        let mut block = 0;
        for i in 0..n {
            if i + 1 > self.ends[block] {
                block += 1;
            }
            let e: f64 = rng.sample(StandardNormal);
            let mut v = self.intercepts[block] + self.noise_sd[block] * e;
            for (&j, &b) in &self.coefficients[block] {
                v += b * x[(i, j - 1)];
            }
            if let Some(rho) = self.rho {
                v += rho * prev;
            }
            prev = v;
            y.push(v);
        }
        let mut data = Dataset::new(y, Some(x))
            .expect("valid generated data")
            .with_ar_lag(self.rho.is_some());
        data.meta.source = format!("{} seed {seed}", self.name);
        let truth = GroundTruth {
            generator: self.name.clone(),
            seed,
            n,
            p,
            true_changepoints: self.changepoints(),
            true_theta: None,
            segment_means: self.intercepts.clone(),
            true_beta_per_segment: self.coefficients.clone(),
            true_sigma_per_segment: self.noise_sd.clone(),
            true_active_set: self.active_set(),
            includes_lag: self.rho.is_some(),
            rho: self.rho,
            transient: if self.rho.is_some() { vec![1] } else { Vec::new() },
        };
        (data, truth)
    }
}

/// `n = p = 250` changing regression with three blocks.
pub fn gen_example2(seed: u64) -> (Dataset, GroundTruth) {
    RegressionDesign::example2().generate(seed)
}

/// The same structure with `n = 300` and an AR(1) term, `ρ = 0.5`.
pub fn gen_example3(seed: u64) -> (Dataset, GroundTruth) {
    RegressionDesign::example3().generate(seed)
}

/// Dispatch on the example number.
pub fn gen_example(example: u32, seed: u64) -> Result<(Dataset, GroundTruth)> {
    match example {
        1 => Ok(gen_example1(seed)),
        2 => Ok(gen_example2(seed)),
        3 => Ok(gen_example3(seed)),
        other => Err(Error::Config(format!("unknown example {other}; expected 1, 2 or 3"))),
    }
}

/// Which columns of a CSV file become covariates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariates {
    None,
    /// Every column except the response.
    #[default]
    All,
    Named(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub response: String,
    pub covariates: Covariates,
    pub intercept: bool,
    pub ar_lag: bool,
    pub sqrt: bool,
    pub standardize: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            response: "y".into(),
            covariates: Covariates::All,
            intercept: true,
            ar_lag: false,
            sqrt: false,
            standardize: false,
        }
    }
}

/// Reads a headered CSV into a dataset. A square-root transform is applied
/// before standardization when both are requested.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let csv_err = |e: csv::Error| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Parse {
            path: path.into(),
            row: e.position().map_or(0, |p| p.line() as usize),
            column: String::new(),
            message: e.to_string(),
        },
    };
    let headers: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column '{name}'", path.display())))
    };
    let response = find(&schema.response)?;
    let cov_idx: Vec<usize> = match &schema.covariates {
        Covariates::None => Vec::new(),
        Covariates::All => (0..headers.len()).filter(|&c| c != response).collect(),
        Covariates::Named(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
    };
    let mut y = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse = |c: usize| -> Result<f64> {
            let field = record.get(c).unwrap_or("");
            field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.into(),
                row: line,
                column: headers[c].clone(),
                message: format!("'{field}' is not a finite number"),
            })
        };
        y.push(parse(response)?);
        for &c in &cov_idx {
            xs.push(parse(c)?);
        }
    }
    if schema.sqrt {
        if let Some(i) = y.iter().position(|v| *v < 0.0) {
            return Err(Error::Parse {
                path: path.into(),
                row: i + 2,
                column: schema.response.clone(),
                message: "square-root transform needs non-negative responses".into(),
            });
        }
        y.iter_mut().for_each(|v| *v = v.sqrt());
    }
    if schema.standardize {
        standardize(&mut y)?;
    }
    let n = y.len();
    let x = (!cov_idx.is_empty()).then(|| DMatrix::from_row_slice(n, cov_idx.len(), &xs));
    let names = cov_idx.iter().map(|&c| headers[c].clone()).collect();
    let mut data = Dataset::new(y, x)?
        .with_covariate_names(names)?
        .with_intercept(schema.intercept)
        .with_ar_lag(schema.ar_lag);
    data.meta.source = path.display().to_string();
    data.meta.sqrt_transform = schema.sqrt;
    data.meta.standardized = schema.standardize;
    Ok(data)
}

/// Centers to mean 0 and scales to sample standard deviation 1.
pub fn standardize(y: &mut [f64]) -> Result<()> {
    let n = y.len() as f64;
    if y.len() < 2 {
        return Err(Error::DegenerateInput("cannot standardize fewer than 2 values".into()));
    }
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateInput("constant response cannot be standardized".into()));
    }
    y.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    Ok(())
}

/// Writes `y` followed by the covariates, with shortest round-trip decimals.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = vec!["y".to_string()];
    header.extend(data.covariate_names.iter().cloned());
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for i in 0..data.n() {
        line.clear();
        line.push_str(&data.y[i].to_string());
        if let Some(x) = &data.x {
            for j in 0..x.ncols() {
                line.push(',');
                line.push_str(&x[(i, j)].to_string());
            }
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}
