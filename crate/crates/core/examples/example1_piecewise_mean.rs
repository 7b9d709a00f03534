//! Piecewise-constant mean with seven blocks: posterior over the number of
//! blocks, changepoint probabilities and the PELT fit on the same data.
//!
//! `cargo run --release --example example1_piecewise_mean -- [seed]`

use cpvs::baselines::{default_penalty, pelt_detect};
use cpvs::simgen::gen_example1;
use cpvs::{run_chain, PriorConfig, SamplerConfig};

fn main() -> cpvs::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, truth) = gen_example1(seed);
    let design = data.design();
    let prior = PriorConfig::defaults_for(&design);
    let config = SamplerConfig {
        seed,
        ..SamplerConfig::default()
    };
    let start = std::time::Instant::now();
    let post = run_chain(&design, &prior, &config)?;
    println!("sampler: {:.2?}", start.elapsed());

    println!("true changepoints:  {:?}", truth.true_changepoints);
    println!("posterior peaks:    {:?}", post.changepoint_estimates(5, 0.5));
    println!("MAP changepoints:   {:?}", post.map_changepoints);
    println!("number of blocks:");
    for (k, p) in &post.partition_count_dist {
        println!("  {k:>2}  {p:.3}");
    }
    println!("E[sigma2 | y] = {:.4}, E[tau2 | y] = {:.4}", post.sigma2_mean, post.tau2_mean);

    let (penalty, s2, _) = default_penalty(&data.y, None);
    let pelt = pelt_detect(&data.y, penalty, 2)?;
    println!("PELT (sigma2 = {s2:.4}, penalty = {penalty:.3}): {:?}", pelt.changepoints);
    Ok(())
}
