//! Log Bayes factors between competing models on one simulated regression
//! data set: misplaced changepoints, a missing block, a dropped covariate.
//!
//! `cargo run --release --example bayes_factors -- [seed]`

use cpvs::simgen::RegressionDesign;
use cpvs::{log_bayes_factor, log_posterior_ratio, InclusionMask, ModelId, ModelKind, PriorConfig, Sigma2};

fn main() -> cpvs::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let design_spec = RegressionDesign::scaled(400, 15, [1.0; 3]);
    let (data, truth) = design_spec.generate(seed);
    let design = data.design();
    let prior = PriorConfig {
        kind: ModelKind::Regression,
        sigma2: Sigma2::Known(1.0),
        ..PriorConfig::defaults_for(&design)
    };

    let active: Vec<usize> = truth.true_active_set.iter().map(|j| j - 1).collect();
    let mask = InclusionMask::from_indices(design.n_selectable(), &active)?;
    let model = |cps: &[usize], mask: &InclusionMask| -> cpvs::Result<ModelId> {
        Ok(ModelId::new(design.segmentation_from_changepoints(cps)?, mask.clone()))
    };
    let truth_model = model(&truth.true_changepoints, &mask)?;
    println!("true changepoints {:?}, active {:?}", truth.true_changepoints, truth.true_active_set);

    let shifted: Vec<usize> = truth.true_changepoints.iter().map(|c| c + 10).collect();
    let without_x2: Vec<usize> = active.iter().copied().filter(|&m| m != 1).collect();
    let no_x2 = InclusionMask::from_indices(design.n_selectable(), &without_x2)?;
    let alternatives = [
        ("changepoints shifted by 10", model(&shifted, &mask)?),
        ("second changepoint removed", model(&truth.true_changepoints[..1], &mask)?),
        ("x2 dropped", model(&truth.true_changepoints, &no_x2)?),
        ("no changepoints", model(&[], &mask)?),
    ];
    println!("{:<28} {:>12} {:>14}", "alternative", "log BF", "log post ratio");
    for (name, alt) in &alternatives {
        let bf = log_bayes_factor(&design, alt, &truth_model, &prior)?;
        let pr = log_posterior_ratio(&design, alt, &truth_model, &prior)?;
        println!("{name:<28} {bf:>12.2} {pr:>14.2}");
    }
    Ok(())
}
