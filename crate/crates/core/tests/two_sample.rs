use std::sync::Arc;

use lsgraph::curve::hardy_weinberg_arclength;
use lsgraph::distribution::{BetaParams, Underlying};
use lsgraph::graph::{sample_lsm, LsmSpec};
use lsgraph::hypothesis::{two_sample_lsm_test, DimensionChoiceMode, TwoSampleConfig};
use lsgraph::rng::derive_seed;

fn spec(a: f64, b: f64, n: usize) -> LsmSpec {
    LsmSpec {
        curve: Arc::new(hardy_weinberg_arclength()),
        underlying: Underlying::Beta(BetaParams::new(a, b).unwrap()),
        n,
        sparsity: 1.0,
    }
}

fn fixed(d: usize) -> TwoSampleConfig {
    TwoSampleConfig {
        dimension: DimensionChoiceMode::Fixed(d),
        ..TwoSampleConfig::default()
    }
}

#[test]
fn statistic_invariant_to_relabeling() {
    let s = spec(2.0, 5.0, 300);
    let a1 = sample_lsm(&s, 5).unwrap().adjacency;
    let a2 = sample_lsm(&s, 6).unwrap().adjacency;
    let perm1: Vec<usize> = (0..300).map(|i| (i * 37 + 11) % 300).collect();
    let perm2: Vec<usize> = (0..300).rev().collect();
    for config in [fixed(3), TwoSampleConfig::default()] {
        let base = two_sample_lsm_test(&a1, &a2, &config).unwrap();
        let moved = two_sample_lsm_test(&a1.permuted(&perm1).unwrap(), &a2.permuted(&perm2).unwrap(), &config).unwrap();
        assert!((base.as_is.statistic - moved.as_is.statistic).abs() <= 1e-8);
        assert!((base.flipped.statistic - moved.flipped.statistic).abs() <= 1e-8);
    }
}

#[test]
fn flipping_an_asymmetric_null_lowers_the_p_value() {
    let s = spec(2.0, 5.0, 300);
    let reps = 20;
    let lower = (0..reps)
        .filter(|&r| {
            let a1 = sample_lsm(&s, derive_seed(8, 1, r)).unwrap().adjacency;
            let a2 = sample_lsm(&s, derive_seed(8, 2, r)).unwrap().adjacency;
            let rep = two_sample_lsm_test(&a1, &a2, &fixed(3)).unwrap();
            rep.flipped.p_value < rep.as_is.p_value
        })
        .count();
    assert!(lower * 10 >= reps as usize * 9, "flipped lower in {lower} of {reps}");
}
