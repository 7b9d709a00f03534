//! PELT against the unpruned dynamic program, plus the penalty's effect on
//! the number of detected changepoints.
//!
//! `cargo run --release --example pelt_baseline -- [seed]`

use std::time::Instant;

use cpvs::baselines::{default_penalty, optimal_partition_dp, pelt_detect};
use cpvs::simgen::gen_example1;

fn main() -> cpvs::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, truth) = gen_example1(seed);
    let (penalty, sigma2, fallback) = default_penalty(&data.y, None);
    println!("noise variance {sigma2:.4} (fallback: {fallback}), penalty {penalty:.3}");

    let t = Instant::now();
    let pelt = pelt_detect(&data.y, penalty, 2)?;
    let t_pelt = t.elapsed();
    let t = Instant::now();
    let dp = optimal_partition_dp(&data.y, penalty, 2)?;
    let t_dp = t.elapsed();
    println!("truth: {:?}", truth.true_changepoints);
    println!("PELT:  {:?} in {t_pelt:.2?}", pelt.changepoints);
    println!("DP:    {:?} in {t_dp:.2?}", dp.changepoints);
    assert_eq!(pelt.changepoints, dp.changepoints);
    for seg in &pelt.segment_params {
        println!("  {:>3}..={:<3} mean {:>6.3}", seg.start, seg.end, seg.mean);
    }

    for scale in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let r = pelt_detect(&data.y, scale * penalty, 2)?;
        println!("penalty x{scale:<4} -> {} changepoints", r.changepoints.len());
    }
    Ok(())
}
