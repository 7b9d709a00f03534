//! Changing regression with an AR(1) term. The lagged response is offered to
//! the selector as one more column.
//!
//! `cargo run --release --example example3_autoregressive -- [seed]`

use cpvs::simgen::gen_example3;
use cpvs::{run_chain, PriorConfig, SamplerConfig};

fn main() -> cpvs::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, truth) = gen_example3(seed);
    let design = data.design();
    let prior = PriorConfig::defaults_for(&design);
    let config = SamplerConfig {
        seed,
        ..SamplerConfig::default()
    };
    let start = std::time::Instant::now();
    let post = run_chain(&design, &prior, &config)?;
    println!("sampler: {:.2?}", start.elapsed());

    println!("true changepoints: {:?} (rho = {:?})", truth.true_changepoints, truth.rho);
    println!("posterior peaks:   {:?}", post.changepoint_estimates(5, 0.5));
    for m in post.selected(0.05) {
        println!("  {:<5} PIP {:.3}", post.covariate_names[m], post.pip[m]);
    }
    Ok(())
}
