//! Round trip through CSV: write a simulated data set, read it back with a
//! schema, and fit the regression model to the loaded copy.
//!
//! `cargo run --release --example csv_ingest -- [path]`

use std::path::PathBuf;

use cpvs::report::write_plot_data;
use cpvs::simgen::{gen_example2, load_csv, write_csv, Covariates, CsvSchema};
use cpvs::{run_chain, PriorConfig, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("cpvs_csv_ingest");
    std::fs::create_dir_all(&dir)?;
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let (data, _) = gen_example2(3);
            let p = dir.join("example2.csv");
            write_csv(&data, &p)?;
            p
        }
    };

    // Keep only the first 20 covariates to make the fit quick.
    let names: Vec<String> = (1..=20).map(|j| format!("x{j}")).collect();
    let schema = CsvSchema {
        covariates: Covariates::Named(names),
        ..CsvSchema::default()
    };
    let data = load_csv(&path, &schema)?;
    println!("loaded {} rows, {} covariates from {}", data.n(), data.p(), path.display());

    let design = data.design();
    let prior = PriorConfig::defaults_for(&design);
    let post = run_chain(&design, &prior, &SamplerConfig { seed: 1, ..SamplerConfig::default() })?;
    println!("changepoints: {:?}", post.changepoint_estimates(5, 0.5));
    let selected: Vec<&str> = post.selected(0.5).iter().map(|&m| post.covariate_names[m].as_str()).collect();
    println!("selected: {selected:?}");
    let files = write_plot_data(&post, &data.y, &dir)?;
    println!("plot data in {}: {files:?}", dir.display());
    Ok(())
}
