//! Exact posterior by enumeration on a tiny data set, compared with a long
//! Gibbs run on the same data.
//!
//! `cargo run --release --example exact_oracle`

use nalgebra::DMatrix;

use cpvs::oracle::{enumerate_exact, DEFAULT_MAX_N, DEFAULT_MAX_P};
use cpvs::{run_chain, Dataset, ModelKind, PriorConfig, SamplerConfig, Sigma2};

fn main() -> cpvs::Result<()> {
    let y = vec![0.2, -0.1, 0.3, 2.4, 2.1, 2.6, 2.2, 0.1, -0.3];
    let x = DMatrix::from_column_slice(9, 2, &[
        0.5, -1.2, 0.3, 1.1, -0.4, 0.9, -1.5, 0.2, 0.7, //
        1.0, 0.1, -0.6, 0.4, 1.3, -0.8, 0.2, -1.1, 0.5,
    ]);
    let design = Dataset::new(y, Some(x))?.design();
    let prior = PriorConfig {
        kind: ModelKind::Regression,
        sigma2: Sigma2::Estimate,
        changepoint_prob: 0.2,
        ..PriorConfig::defaults_for(&design)
    };

    let exact = enumerate_exact(&design, &prior, DEFAULT_MAX_N, DEFAULT_MAX_P)?;
    println!("{} models, log normalizer {:.4}", exact.table.len(), exact.log_normalizer);
    println!("MAP model: changepoints {:?}, covariates {:?}", exact.map_model.segmentation.starts(), exact.map_model.mask.indices());

    let config = SamplerConfig {
        iterations: 102_000,
        burn_in: 2_000,
        seed: 1,
        ..SamplerConfig::default()
    };
    let post = run_chain(&design, &prior, &config)?;
    println!("{:>5} {:>8} {:>8}", "index", "exact", "gibbs");
    for (i, (a, b)) in exact.cp_prob.iter().zip(&post.cp_prob).enumerate() {
        println!("{:>5} {a:>8.4} {b:>8.4}", i + 1);
    }
    for (m, (a, b)) in exact.pip.iter().zip(&post.pip).enumerate() {
        println!("pip x{} {a:>8.4} {b:>8.4}", m + 1);
    }
    Ok(())
}
