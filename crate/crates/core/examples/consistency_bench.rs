//! Mean log Bayes factor of a wrong model against the truth as the sample
//! size grows, for every scenario.
//!
//! `cargo run --release --example consistency_bench -- [replicates]`

use cpvs::bench::{run_bench, BenchConfig, Scenario};

fn main() -> cpvs::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let config = BenchConfig {
        replicates,
        seed: 1,
        ..BenchConfig::default()
    };
    let result = run_bench(&Scenario::ALL, &config)?;
    print!("{:<18}", "scenario");
    for n in &config.n_grid {
        print!("{:>10}", format!("n={n}"));
    }
    println!();
    for sc in Scenario::ALL {
        print!("{:<18}", sc.to_string());
        for m in result.means(sc) {
            print!("{m:>10.1}");
        }
        println!("   decreasing: {}", result.strictly_decreasing(sc));
    }
    Ok(())
}
