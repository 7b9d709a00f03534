//! Command-line interface. The `cpvs` binary is a thin wrapper over [`main_entry`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{default_penalty, pelt_detect};
use crate::bench::{run_bench, BenchConfig, Scenario, ShiftRule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{InclusionPrior, ModelKind, PriorConfig, Sigma2};
use crate::oracle::enumerate_exact;
use crate::report::{
    write_pelt_segments_csv, write_plot_data, OracleReport, PeltReport, Provenance, ResolvedConfig, RunReport,
};
use crate::sampler::{run_chain, SamplerConfig};
use crate::simgen::{gen_example, load_csv, write_csv, Covariates, CsvSchema};

#[derive(Debug, Parser)]
#[command(name = "cpvs", version, about = "Bayesian changepoint detection with variable selection")]
pub struct Cli {
    /// Worker threads for chains, enumeration and benches.
    #[arg(long, env = "CPVS_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated reference dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write a report with plot data.
    Detect(DetectArgs),
    /// Run the PELT baseline.
    Pelt(PeltArgs),
    /// Mean log Bayes factors of wrong models against the truth as n grows.
    BenchConsistency(BenchArgs),
    /// Exact posterior of a small instance, optionally against the sampler.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub example: u32,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    pub input: Option<PathBuf>,
    /// Generate a reference dataset instead of reading a file.
    #[arg(long)]
    pub example: Option<u32>,
    /// Seed for `--example` data.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// `all` (every other column), `none`, or a comma-separated list.
    #[arg(long, default_value = "all")]
    pub covariates: String,
    #[arg(long)]
    pub no_intercept: bool,
    /// Add the lagged response as a selectable column.
    #[arg(long)]
    pub ar_lag: bool,
    #[arg(long)]
    pub sqrt: bool,
    #[arg(long)]
    pub standardize: bool,
}

/// Prior settings that a config file or flags may override.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    /// `piecewise-mean` or `regression`.
    #[arg(long = "model")]
    pub model: Option<String>,
    /// Known noise variance, or `estimate`.
    #[arg(long)]
    pub sigma2: Option<Sigma2>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub sample_tau2: Option<bool>,
    #[arg(long)]
    pub mean_var: Option<f64>,
    #[arg(long)]
    pub changepoint_prob: Option<f64>,
    /// Sets the changepoint probability to this count divided by n.
    #[arg(long)]
    pub expected_changepoints: Option<f64>,
    /// Fixed inclusion probability for every column.
    #[arg(long)]
    pub inclusion_prob: Option<f64>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub max_covariates: Option<usize>,
}

impl PriorOverrides {
    fn apply(&self, prior: &mut PriorConfig, n_rows: usize) -> Result<()> {
        if let Some(m) = &self.model {
            prior.kind = match m.as_str() {
                "piecewise-mean" | "piecewise_mean" => ModelKind::PiecewiseMean,
                "regression" => ModelKind::Regression,
                other => return Err(Error::Config(format!("unknown model '{other}'"))),
            };
            if prior.kind == ModelKind::Regression && self.sample_tau2.is_none() {
                prior.sample_tau2 = false;
            }
        }
        if let Some(s) = self.sigma2 {
            prior.sigma2 = s;
        }
        if let Some(t) = self.tau2 {
            prior.tau2 = t;
        }
        if let Some(b) = self.sample_tau2 {
            prior.sample_tau2 = b;
        }
        if let Some(v) = self.mean_var {
            prior.mean_var = v;
        }
        if let Some(p) = self.changepoint_prob {
            prior.changepoint_prob = p;
        }
        if let Some(c) = self.expected_changepoints {
            prior.changepoint_prob = c / n_rows as f64;
        }
        if let Some(a) = self.alpha1 {
            prior.inclusion = InclusionPrior::Penalized { alpha1: a };
        }
        if let Some(p) = self.inclusion_prob {
            prior.inclusion = InclusionPrior::Fixed(p);
        }
        if let Some(q) = self.max_covariates {
            prior.max_covariates = q;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerOverrides {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
}

impl SamplerOverrides {
    fn apply(&self, s: &mut SamplerConfig) {
        if let Some(v) = self.iterations {
            s.iterations = v;
        }
        if let Some(v) = self.burn_in {
            s.burn_in = v;
        }
        if let Some(v) = self.thin {
            s.thin = v;
        }
        if let Some(v) = self.chains {
            s.chains = v;
        }
    }
}

/// Contents of a TOML config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub prior: PriorOverrides,
    #[serde(default)]
    pub sampler: SamplerOverrides,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub prior: PriorOverrides,
    #[command(flatten)]
    pub sampler: SamplerOverrides,
    /// Also run PELT with the default penalty.
    #[arg(long)]
    pub pelt: bool,
    #[arg(long, default_value_t = 1)]
    pub min_seg: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PeltArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Per-changepoint penalty; defaults to `2 σ² log n`.
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Noise variance for the default penalty; estimated from the data if absent.
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub min_seg: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario name or `all`; repeatable. Defaults to the five core scenarios.
    #[arg(long)]
    pub scenario: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 15)]
    pub p: usize,
    /// `log2:C` for `⌈C (ln n)²⌉` observations or `fixed:K`.
    #[arg(long, default_value = "log2:0.5")]
    pub shift: String,
    #[arg(long, default_value_t = 1.0)]
    pub tau2: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub prior: PriorOverrides,
    /// Run the sampler too and report the largest deviations.
    #[arg(long)]
    pub compare: bool,
    /// Retained sampler draws for `--compare`.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::oracle::DEFAULT_MAX_N)]
    pub n_max: usize,
    #[arg(long, default_value_t = crate::oracle::DEFAULT_MAX_P)]
    pub p_max: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn parse_shift(s: &str) -> Result<ShiftRule> {
    let bad = || Error::Config(format!("shift must be log2:C or fixed:K, got '{s}'"));
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "log2" => value.parse().map(ShiftRule::LogSquared).map_err(|_| bad()),
        "fixed" => value.parse().map(ShiftRule::Fixed).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

fn load_input(args: &InputArgs) -> Result<(Dataset, Provenance)> {
    let (data, input, generator, data_seed) = match (&args.input, args.example) {
        (_, Some(k)) => {
            let (d, t) = gen_example(k, args.data_seed)?;
            (d, None, Some(t.generator), Some(args.data_seed))
        }
        (Some(path), None) => {
            let covariates = match args.covariates.as_str() {
                "all" => Covariates::All,
                "none" => Covariates::None,
                list => Covariates::Named(list.split(',').map(|c| c.trim().to_string()).collect()),
            };
            let schema = CsvSchema {
                response: args.response.clone(),
                covariates,
                intercept: !args.no_intercept,
                ar_lag: args.ar_lag,
                sqrt: args.sqrt,
                standardize: args.standardize,
            };
            (load_csv(path, &schema)?, Some(path.display().to_string()), None, None)
        }
        (None, None) => return Err(Error::Config("either --input or --example is required".into())),
    };
    let prov = Provenance {
        input,
        generator,
        data_seed,
        n: data.n(),
        p: data.p(),
        ar_lag: data.ar_lag,
        meta: data.meta.clone(),
    };
    Ok((data, prov))
}

fn resolve_prior(
    data: &Dataset,
    config: Option<&Path>,
    flags: &PriorOverrides,
    sampler_flags: Option<&SamplerOverrides>,
) -> Result<(PriorConfig, SamplerConfig)> {
    let design = data.design();
    let n = design.n_rows();
    let mut prior = PriorConfig::defaults_for(&design);
    let mut sampler = SamplerConfig::default();
    if let Some(path) = config {
        let file = ConfigFile::load(path)?;
        file.prior.apply(&mut prior, n)?;
        file.sampler.apply(&mut sampler);
    }
    flags.apply(&mut prior, n)?;
    if let Some(s) = sampler_flags {
        s.apply(&mut sampler);
    }
    prior.validate(&design)?;
    Ok((prior, sampler))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (data, truth) = gen_example(args.example, args.seed)?;
    create_dir(&args.out_dir)?;
    let stem = format!("example{}_seed{}", args.example, args.seed);
    let csv = args.out_dir.join(format!("{stem}.csv"));
    write_csv(&data, &csv)?;
    truth.write_json(&args.out_dir.join(format!("{stem}_truth.json")))?;
    println!(
        "wrote {} ({} rows, {} covariates, {} changepoints)",
        csv.display(),
        data.n(),
        data.p(),
        truth.true_changepoints.len()
    );
    Ok(())
}

pub fn cmd_detect(args: &DetectArgs) -> Result<RunReport> {
    let start = Instant::now();
    let (data, prov) = load_input(&args.input)?;
    let (prior, mut sampler) = resolve_prior(&data, args.config.as_deref(), &args.prior, Some(&args.sampler))?;
    sampler.seed = args.seed;
    let design = data.design();
    let mut report = RunReport::new("detect", Some(args.seed), prov);
    report.config = Some(ResolvedConfig {
        prior: prior.clone(),
        sampler: sampler.clone(),
    });
    let t = Instant::now();
    let summary = run_chain(&design, &prior, &sampler)?;
    report.timings.insert("sampler".into(), t.elapsed().as_secs_f64());
    create_dir(&args.out_dir)?;
    write_plot_data(&summary, &data.y, &args.out_dir)?;
    if args.pelt {
        let (penalty, s2, fallback) = default_penalty(&data.y, None);
        let result = pelt_detect(&data.y, penalty, args.min_seg)?;
        write_pelt_segments_csv(&result, &args.out_dir.join("pelt_segments.csv"))?;
        report.pelt = Some(PeltReport {
            result,
            noise_variance: Some(s2),
            variance_fallback: fallback,
        });
    }
    println!(
        "blocks (mode): {}  MAP changepoints: {:?}  selected: {:?}",
        summary.partition_count_mode(),
        summary.map_changepoints,
        summary
            .selected(0.5)
            .iter()
            .map(|&m| summary.covariate_names[m].as_str())
            .collect::<Vec<_>>()
    );
    report.summary = Some(summary);
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    report.write(&args.out_dir.join("report.json"))?;
    Ok(report)
}

pub fn cmd_pelt(args: &PeltArgs) -> Result<RunReport> {
    let start = Instant::now();
    let (data, prov) = load_input(&args.input)?;
    let (default, s2, fallback) = default_penalty(&data.y, args.sigma2);
    let penalty = args.penalty.unwrap_or(default);
    if fallback && args.penalty.is_none() {
        eprintln!("warning: noise variance not estimable; using 1 for the default penalty");
    }
    let result = pelt_detect(&data.y, penalty, args.min_seg)?;
    create_dir(&args.out_dir)?;
    write_pelt_segments_csv(&result, &args.out_dir.join("pelt_segments.csv"))?;
    println!("penalty {penalty:.4}  changepoints: {:?}", result.changepoints);
    let mut report = RunReport::new("pelt", None, prov);
    report.pelt = Some(PeltReport {
        result,
        noise_variance: args.penalty.is_none().then_some(s2),
        variance_fallback: fallback && args.penalty.is_none(),
    });
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    report.write(&args.out_dir.join("report.json"))?;
    Ok(report)
}

pub fn cmd_bench_consistency(args: &BenchArgs) -> Result<crate::bench::BenchResult> {
    let scenarios: Vec<Scenario> = if args.scenario.is_empty() {
        Scenario::CORE.to_vec()
    } else if args.scenario.iter().any(|s| s == "all") {
        Scenario::ALL.to_vec()
    } else {
        args.scenario.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let config = BenchConfig {
        n_grid: args.n_grid.clone(),
        replicates: args.replicates,
        seed: args.seed,
        p: args.p,
        shift: parse_shift(&args.shift)?,
        tau2: args.tau2,
    };
    let result = run_bench(&scenarios, &config)?;
    create_dir(&args.out_dir)?;
    result.write_long_csv(&args.out_dir.join("bench_long.csv"))?;
    result.write_summary_csv(&args.out_dir.join("bench_summary.csv"))?;
    for &s in &scenarios {
        let means: Vec<String> = result.means(s).iter().map(|m| format!("{m:.3}")).collect();
        println!(
            "{:<18} {}  {}",
            s.name(),
            means.join(" "),
            if result.strictly_decreasing(s) { "decreasing" } else { "not decreasing" }
        );
    }
    Ok(result)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<RunReport> {
    let start = Instant::now();
    let (data, prov) = load_input(&args.input)?;
    let (prior, _) = resolve_prior(&data, args.config.as_deref(), &args.prior, None)?;
    let design = data.design();
    let exact = enumerate_exact(&design, &prior, args.n_max, args.p_max)?;
    let mut report = RunReport::new("oracle", Some(args.seed), prov);
    let sampler = if args.compare {
        let burn_in = 2000;
        let cfg = SamplerConfig {
            iterations: args.samples + burn_in,
            burn_in,
            thin: 1,
            seed: args.seed,
            chains: 1,
        };
        report.config = Some(ResolvedConfig {
            prior: prior.clone(),
            sampler: cfg.clone(),
        });
        Some(run_chain(&design, &prior, &cfg)?)
    } else {
        None
    };
    let oracle = OracleReport::new(&exact, sampler);
    println!("models: {}  cp_prob: {:?}", oracle.n_models, oracle.cp_prob);
    if let Some(c) = &oracle.comparison {
        println!(
            "max |sampler - exact|: cp_prob {:.4}  pip {:.4}  partition count {:.4}",
            c.max_abs_cp_prob, c.max_abs_pip, c.max_abs_partition_count
        );
    }
    report.oracle = Some(oracle);
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    create_dir(&args.out_dir)?;
    report.write(&args.out_dir.join("oracle_report.json"))?;
    Ok(report)
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        // Fails only if a global pool exists already, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Detect(a) => cmd_detect(a).map(drop),
        Command::Pelt(a) => cmd_pelt(a).map(drop),
        Command::BenchConsistency(a) => cmd_bench_consistency(a).map(drop),
        Command::Oracle(a) => cmd_oracle(a).map(drop),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
