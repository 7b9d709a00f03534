use proptest::prelude::*;

use cpvs::baselines::{default_penalty, mad_noise_variance, optimal_partition_dp, pelt_detect};
use cpvs::simgen::gen_example1;

fn series() -> impl Strategy<Value = (Vec<f64>, usize, f64)> {
    (1usize..5, 0.0f64..8.0).prop_flat_map(|(min_seg, pen)| {
        (prop::collection::vec(-3i32..4, (2 * min_seg)..80), Just(min_seg), Just(pen))
            .prop_map(|(levels, m, p)| {
                // Small integer levels plus a deterministic wiggle keep ties rare but possible.
                let y = levels
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| l as f64 + 0.1 * ((i * 7 % 5) as f64))
                    .collect();
                (y, m, p)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pruning_never_changes_the_optimum((y, min_seg, pen) in series()) {
        let a = pelt_detect(&y, pen, min_seg).unwrap();
        let b = optimal_partition_dp(&y, pen, min_seg).unwrap();
        prop_assert_eq!(&a.changepoints, &b.changepoints);
        prop_assert!((a.total_cost - b.total_cost).abs() <= 1e-9 * (1.0 + b.total_cost.abs()));
    }

    #[test]
    fn shifting_the_series_changes_nothing((y, min_seg, pen) in series(), shift in -50.0f64..50.0) {
        let moved: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let a = pelt_detect(&y, pen, min_seg).unwrap();
        let b = pelt_detect(&moved, pen, min_seg).unwrap();
        prop_assert_eq!(a.changepoints, b.changepoints);
    }

    #[test]
    fn blocks_respect_the_minimum_length((y, min_seg, pen) in series()) {
        let r = pelt_detect(&y, pen, min_seg).unwrap();
        prop_assert!(r.segment_params.iter().all(|s| s.end + 1 - s.start >= min_seg));
        prop_assert_eq!(r.segment_params.len(), r.changepoints.len() + 1);
        prop_assert_eq!(r.segment_params.last().unwrap().end, y.len());
    }
}

#[test]
fn larger_penalties_never_add_changepoints() {
    let (data, _) = gen_example1(3);
    let mut last = usize::MAX;
    for pen in [0.05, 0.2, 1.0, 5.0, 50.0] {
        let k = pelt_detect(&data.y, pen, 2).unwrap().changepoints.len();
        assert!(k <= last);
        last = k;
    }
}

#[test]
fn mad_variance_is_close_on_example_one() {
    for seed in 0..10 {
        let (data, _) = gen_example1(seed);
        let v = mad_noise_variance(&data.y).unwrap();
        assert!((0.025..0.06).contains(&v), "seed {seed}: {v}");
    }
}

#[test]
fn recovers_example_one_in_most_seeds() {
    let hits = (0..10)
        .filter(|&seed| {
            let (data, truth) = gen_example1(seed);
            let (pen, _, fallback) = default_penalty(&data.y, None);
            assert!(!fallback);
            let r = pelt_detect(&data.y, pen, 2).unwrap();
            r.changepoints.len() == 6
                && r.changepoints.iter().zip(&truth.true_changepoints).all(|(a, b)| a.abs_diff(*b) <= 5)
        })
        .count();
    assert!(hits >= 8, "{hits}/10");
}
