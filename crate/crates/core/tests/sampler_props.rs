mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use cpvs::oracle::{enumerate_exact, DEFAULT_MAX_N, DEFAULT_MAX_P};
use cpvs::sampler::{chain_rng, fitted_means, gibbs_sweep_changepoints, update_sigma2};
use cpvs::simgen::{gen_example1, gen_example2};
use cpvs::{
    log_marginal_at, run_chain, Chain, ChainState, Dataset, InclusionMask, InclusionPrior, ModelId, ModelKind,
    PriorConfig, SamplerConfig, Segmentation, Sigma2,
};

fn known_regression(d: &cpvs::Design, sigma2: f64) -> PriorConfig {
    PriorConfig {
        kind: ModelKind::Regression,
        sigma2: Sigma2::Known(sigma2),
        sample_tau2: false,
        max_covariates: d.n_selectable(),
        ..PriorConfig::defaults_for(d)
    }
}

#[test]
fn step_conditional_matches_closed_form() {
    let d = Dataset::new(vec![0.0, 0.0, 0.0, 10.0, 10.0, 10.0], None).unwrap().design();
    let prior = PriorConfig {
        changepoint_prob: 0.1,
        ..known_regression(&d, 1.0)
    };
    let chain = Chain::new(&d, &prior, 1, 0).unwrap();
    let split = ModelId::new(Segmentation::from_starts(6, &[3]).unwrap(), InclusionMask::empty(0));
    let lo = log_marginal_at(&d, &split, &prior, 1.0).unwrap() - log_marginal_at(&d, &ModelId::null(&d), &prior, 1.0).unwrap()
        + (0.1f64 / 0.9).ln();
    let expect = 1.0 / (1.0 + (-lo).exp());
    let got = chain.changepoint_conditional(3).unwrap();
    assert!((got - expect).abs() < 1e-12);
    assert!(got > 0.999);

    let start = ChainState::initial(&d, &prior).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hits = (0..10_000)
        .filter(|_| {
            gibbs_sweep_changepoints(&start, &d, &prior, &mut rng)
                .unwrap()
                .segmentation
                .is_changepoint(3)
        })
        .count();
    assert!(hits >= 9_990, "{hits}");
}

#[test]
fn constant_data_never_favors_a_split() {
    let y = vec![0.0; 12];
    let d = Dataset::new(y, None).unwrap().design();
    for prior in [
        known_regression(&d, 1.0),
        PriorConfig {
            sigma2: Sigma2::Known(1.0),
            sample_tau2: false,
            ..PriorConfig::defaults_for(&d)
        },
    ] {
        let chain = Chain::new(&d, &prior, 0, 0).unwrap();
        for row in 1..12 {
            assert!(chain.changepoint_conditional(row).unwrap() < prior.changepoint_prob);
        }
    }
}

#[test]
fn zero_column_keeps_prior_odds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = random_dataset(&mut rng, 30, 2, 1.0);
    let mut x = data.x.clone().unwrap();
    x.column_mut(1).fill(0.0);
    let d = Dataset::new(data.y.clone(), Some(x)).unwrap().design();
    let prior = PriorConfig {
        inclusion: InclusionPrior::Fixed(0.3),
        ..known_regression(&d, 1.0)
    };
    let state = ChainState {
        segmentation: Segmentation::from_starts(30, &[12]).unwrap(),
        mask: InclusionMask::new(vec![true, false]),
        sigma2: 1.0,
        tau2: 1.0,
        iteration: 0,
    };
    let chain = Chain::from_state(&d, &prior, state, chain_rng(0, 0)).unwrap();
    assert!((chain.inclusion_conditional(1).unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn always_active_covariate_is_included_given_truth() {
    let (data, truth) = gen_example2(4);
    let d = data.design();
    let prior = known_regression(&d, 1.0);
    let prior = PriorConfig {
        max_covariates: 10,
        ..prior
    };
    let state = ChainState {
        segmentation: d.segmentation_from_changepoints(&truth.true_changepoints).unwrap(),
        mask: InclusionMask::from_indices(250, &[2, 11]).unwrap(),
        sigma2: 1.0,
        tau2: 1.0,
        iteration: 0,
    };
    let chain = Chain::from_state(&d, &prior, state, chain_rng(0, 0)).unwrap();
    assert!(chain.inclusion_conditional(1).unwrap() > 0.99);
}

#[test]
fn certain_inclusion_is_forced() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_dataset(&mut rng, 20, 2, 1.0);
    let d = data.design();
    let prior = PriorConfig {
        inclusion: InclusionPrior::PerColumn(vec![1.0, 0.5]),
        ..known_regression(&d, 1.0)
    };
    let mut chain = Chain::new(&d, &prior, 2, 0).unwrap();
    for _ in 0..200 {
        chain.sweep().unwrap();
        assert!(chain.state().mask.contains(0));
    }
}

#[test]
fn covariate_cap_is_never_exceeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = random_dataset(&mut rng, 30, 4, 0.3);
    let d = data.design();
    let prior = PriorConfig {
        inclusion: InclusionPrior::Fixed(0.9),
        max_covariates: 2,
        ..known_regression(&d, 1.0)
    };
    let mut chain = Chain::new(&d, &prior, 3, 0).unwrap();
    for _ in 0..300 {
        chain.sweep().unwrap();
        assert!(chain.state().mask.size() <= 2);
        assert!(chain.state().segmentation.blocks().iter().all(|b| !b.is_empty()));
    }
}

fn estimate_state(d: &cpvs::Design) -> (PriorConfig, ChainState) {
    let prior = PriorConfig {
        kind: ModelKind::Regression,
        sigma2: Sigma2::Estimate,
        sample_tau2: false,
        max_covariates: d.n_selectable(),
        ..PriorConfig::defaults_for(d)
    };
    let state = ChainState {
        mask: InclusionMask::new(vec![true; d.n_selectable()]),
        ..ChainState::initial(d, &prior).unwrap()
    };
    (prior, state)
}

#[test]
fn exact_fit_drives_variance_to_zero() {
    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v).collect();
    let data = Dataset::new(y, Some(nalgebra::DMatrix::from_column_slice(100, 1, &x))).unwrap();
    let d = data.design();
    let (mut prior, mut state) = estimate_state(&d);
    prior.tau2 = 100.0;
    state.tau2 = 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let small = (0..10_000)
        .filter(|_| update_sigma2(&state, &d, &prior, &mut rng).unwrap().sigma2 < 0.01)
        .count();
    assert!(small > 9_900, "{small}");
}

#[test]
fn variance_draws_concentrate_on_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<f64> = (0..1000).map(|_| 2.0 * normal(&mut rng)).collect();
    let d = Dataset::new(y, None).unwrap().design();
    let (prior, state) = estimate_state(&d);
    let draws: Vec<f64> = (0..4000)
        .map(|_| update_sigma2(&state, &d, &prior, &mut rng).unwrap().sigma2)
        .collect();
    let mean = draws.iter().sum::<f64>() / 4000.0;
    assert!((3.5..=4.5).contains(&mean), "{mean}");
}

#[test]
fn variance_draws_scale_with_the_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..60).map(|_| 1.0 + normal(&mut rng)).collect();
    let y3: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
    let quantiles = |y: Vec<f64>, seed: u64| {
        let d = Dataset::new(y, None).unwrap().design();
        let (prior, state) = estimate_state(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..10_000)
            .map(|_| update_sigma2(&state, &d, &prior, &mut rng).unwrap().sigma2)
            .collect();
        v.sort_by(f64::total_cmp);
        [v[1000], v[5000], v[9000]]
    };
    let a = quantiles(y, 10);
    let b = quantiles(y3, 11);
    for (qa, qb) in a.iter().zip(&b) {
        assert!((qb / 9.0 / qa - 1.0).abs() < 0.05, "{a:?} {b:?}");
    }
}

#[test]
fn fitted_means_track_the_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y: Vec<f64> = (0..200).map(|_| 2.0 + normal(&mut rng)).collect();
    let ybar = y.iter().sum::<f64>() / 200.0;
    let d = Dataset::new(y, None).unwrap().design();
    let prior = known_regression(&d, 1.0);
    let cfg = SamplerConfig {
        iterations: 1500,
        burn_in: 500,
        seed: 1,
        ..Default::default()
    };
    let post = run_chain(&d, &prior, &cfg).unwrap();
    assert!(post.fitted_mean.iter().all(|f| (f - ybar).abs() < 0.05));

    let step: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
    let d = Dataset::new(step.clone(), None).unwrap().design();
    let prior = PriorConfig {
        tau2: 10.0,
        ..known_regression(&d, 0.01)
    };
    let post = run_chain(&d, &prior, &cfg).unwrap();
    for (f, s) in post.fitted_mean.iter().zip(&step) {
        assert!((f - s).abs() < 0.05, "{f} vs {s}");
    }
    // The free function agrees on a fixed state.
    let st = ChainState {
        segmentation: Segmentation::from_starts(40, &[20]).unwrap(),
        ..ChainState::initial(&d, &prior).unwrap()
    };
    let f = fitted_means(&[st], &d, &prior).unwrap();
    assert!((f[0] - 0.0).abs() < 1e-12 && (f[39] - 20.0 / 20.1).abs() < 1e-12);
}

#[test]
fn fitted_means_beat_raw_data() {
    let cfg = SamplerConfig {
        iterations: 2000,
        burn_in: 1000,
        ..Default::default()
    };
    for seed in 0..20 {
        let (data, truth) = gen_example1(seed);
        let d = data.design();
        let prior = PriorConfig::defaults_for(&d);
        let post = run_chain(&d, &prior, &SamplerConfig { seed, ..cfg.clone() }).unwrap();
        let theta = truth.true_theta.unwrap();
        let rmse = |v: &[f64]| (v.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 497.0).sqrt();
        assert!(rmse(&post.fitted_mean) < rmse(&data.y), "seed {seed}");
    }
}

#[test]
fn summary_invariants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = random_dataset(&mut rng, 50, 3, 1.0);
    let d = data.design();
    let prior = PriorConfig::defaults_for(&d);
    let cfg = SamplerConfig {
        iterations: 600,
        burn_in: 100,
        thin: 3,
        chains: 2,
        seed: 4,
    };
    let s = run_chain(&d, &prior, &cfg).unwrap();
    assert_eq!(s.n_samples, 2 * cfg.retained());
    assert_eq!(s.cp_prob[0], 0.0);
    assert!(s.cp_prob.iter().chain(&s.pip).all(|p| (0.0..=1.0).contains(p)));
    assert!((s.partition_count_dist.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!((s.model_size_dist.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(s.chains.len(), 2);
    assert_eq!(s.fitted_mean.len(), 50);
}

#[test]
fn identical_seeds_give_identical_summaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = random_dataset(&mut rng, 40, 3, 1.0);
    let d = data.design();
    let prior = PriorConfig::defaults_for(&d);
    let cfg = SamplerConfig {
        iterations: 400,
        burn_in: 100,
        thin: 1,
        chains: 3,
        seed: 99,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_chain(&d, &prior, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let other = run_chain(&d, &prior, &SamplerConfig { seed: 100, ..cfg.clone() }).unwrap();
    assert_ne!(a.cp_prob, other.cp_prob);
}

#[test]
fn short_runs_agree_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..4 {
        let (d, prior, label) = random_small_instance(&mut rng);
        let exact = enumerate_exact(&d, &prior, DEFAULT_MAX_N, DEFAULT_MAX_P).unwrap();
        let total: f64 = exact.probabilities().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let cfg = SamplerConfig {
            iterations: 41_000,
            burn_in: 1_000,
            seed: i,
            ..Default::default()
        };
        let s = run_chain(&d, &prior, &cfg).unwrap();
        let dev = s
            .cp_prob
            .iter()
            .zip(&exact.cp_prob)
            .chain(s.pip.iter().zip(&exact.pip))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.03, "{label}: {dev}");
    }
}
