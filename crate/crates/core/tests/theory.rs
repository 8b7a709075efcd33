use proptest::prelude::*;
use rand::Rng;
use trecon_core::channel::rng_from_seed;
use trecon_core::exec::Execution;
use trecon_core::theory::{
    bayes_error, bound_value, classify, empirical_risk, generate_theory_dataset, risk_gradient,
    run_proposition_experiment, run_trial, test_error, train_constrained_logistic, DesignMatrix,
    TheoryConfig,
};

fn cfg(n: usize, k: usize, p: f64, samples: usize) -> TheoryConfig {
    TheoryConfig {
        n,
        m: k.max(15),
        k,
        p,
        samples,
        delta: 0.1,
    }
}

/// Error probability of the majority over `k` copies, by listing every flip pattern.
/// Ties count as errors.
fn enumerated_bayes_error(k: usize, p: f64) -> f64 {
    (0u32..1 << k)
        .filter(|pattern| 2 * pattern.count_ones() as usize >= k)
        .map(|pattern| {
            let flips = pattern.count_ones() as i32;
            p.powi(flips) * (1.0 - p).powi(k as i32 - flips)
        })
        .sum()
}

#[test]
fn bayes_error_matches_enumeration() {
    for k in 1..=14 {
        for p in [0.0, 0.05, 0.2, 0.37, 0.49] {
            let closed = bayes_error(k, p).unwrap();
            assert!((closed - enumerated_bayes_error(k, p)).abs() < 1e-12, "k {k} p {p}");
        }
    }
}

#[test]
fn bayes_error_reference_values() {
    assert_eq!(bayes_error(1, 0.3).unwrap(), 0.3);
    assert!((bayes_error(3, 0.1).unwrap() - 0.028).abs() < 1e-12);
    assert!(bayes_error(0, 0.1).is_err());
    assert!(bayes_error(3, 0.5).is_err());
}

#[test]
fn bayes_error_obeys_hoeffding() {
    for k in 1..=30 {
        for step in 1..=9 {
            let p = 0.05 * step as f64;
            let bound = (-2.0 * k as f64 * (0.5 - p).powi(2)).exp();
            assert!(bayes_error(k, p).unwrap() <= bound + 1e-15, "k {k} p {p}");
        }
    }
}

#[test]
fn bound_reference_value_and_shape() {
    let c = cfg(4, 2, 0.1, 10_000);
    let expected = (-0.64f64).exp() + (64.0 + 6.0 * (20f64.ln() / 2.0).sqrt()) / 100.0;
    let b = bound_value(&c).unwrap();
    assert!((b - expected).abs() < 1e-12);
    assert!((b - 1.2407).abs() < 1e-4);
    let huge = cfg(4, 2, 0.1, usize::MAX);
    assert!((bound_value(&huge).unwrap() - (-0.64f64).exp()).abs() < 1e-6);
    let mut last = f64::INFINITY;
    for n in [10usize, 100, 1000, 10_000, 100_000] {
        let v = bound_value(&cfg(4, 2, 0.1, n)).unwrap();
        assert!(v < last);
        last = v;
    }
    // with B R = k n held fixed the bound falls in k
    let fixed = |k: usize| bound_value(&cfg(12 / k, k, 0.1, 10_000)).unwrap();
    assert!(fixed(1) > fixed(2) && fixed(2) > fixed(3) && fixed(3) > fixed(4));
}

#[test]
fn noiseless_copies_repeat_the_clean_sequence() {
    let c = cfg(5, 3, 0.0, 50);
    for e in generate_theory_dataset(&c, 50, &mut rng_from_seed(2)).unwrap() {
        assert_eq!(e.label, e.features[0]);
        assert!(e.features.iter().all(|v| *v == 1 || *v == -1));
        assert_eq!(&e.features[..5], &e.features[5..10]);
        assert_eq!(&e.features[..5], &e.features[10..]);
    }
}

#[test]
fn copy_coordinates_correlate_with_label() {
    let p = 0.4;
    let c = cfg(3, 4, p, 1);
    let data = generate_theory_dataset(&c, 100_000, &mut rng_from_seed(3)).unwrap();
    for copy in 0..4 {
        let corr = data
            .iter()
            .map(|e| f64::from(e.features[copy * 3] * e.label))
            .sum::<f64>()
            / data.len() as f64;
        assert!((corr - (1.0 - 2.0 * p)).abs() < 0.01, "copy {copy}: {corr}");
        // other coordinates carry no information about the label
        let off = data.iter().map(|e| f64::from(e.features[copy * 3 + 1] * e.label)).sum::<f64>()
            / data.len() as f64;
        assert!(off.abs() < 0.01);
    }
}

#[test]
fn generation_is_deterministic() {
    let c = cfg(4, 3, 0.2, 10);
    assert_eq!(
        generate_theory_dataset(&c, 10, &mut rng_from_seed(7)).unwrap(),
        generate_theory_dataset(&c, 10, &mut rng_from_seed(7)).unwrap()
    );
    assert_eq!(run_trial(&c, 4).unwrap(), run_trial(&c, 4).unwrap());
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = rng_from_seed(11);
    for _ in 0..20 {
        let c = cfg(rng.gen_range(1..4), rng.gen_range(1..4), 0.2, 30);
        let data = DesignMatrix::new(&generate_theory_dataset(&c, 30, &mut rng).unwrap()).unwrap();
        let w: Vec<f64> = (0..c.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = risk_gradient(&data, &w);
        let h = 1e-5;
        for j in 0..w.len() {
            let mut hi = w.clone();
            let mut lo = w.clone();
            hi[j] += h;
            lo[j] -= h;
            let numeric = (empirical_risk(&data, &hi) - empirical_risk(&data, &lo)) / (2.0 * h);
            let rel = (numeric - g[j]).abs() / g[j].abs().max(1e-3);
            assert!(rel < 1e-5, "coordinate {j}: {numeric} vs {}", g[j]);
        }
    }
}

#[test]
fn separable_case_is_learned_exactly() {
    let c = cfg(4, 1, 0.0, 500);
    let train = generate_theory_dataset(&c, 500, &mut rng_from_seed(13)).unwrap();
    let fit = train_constrained_logistic(&train, c.weight_bound()).unwrap();
    assert_eq!(test_error(&c, &fit.weights, 10_000, &mut rng_from_seed(14)), 0.0);
}

#[test]
fn zero_score_counts_as_positive() {
    assert_eq!(classify(&[0.0, 0.0], &[1, -1]), 1);
    assert_eq!(classify(&[1.0, 1.0], &[1, -1]), 1);
    assert_eq!(classify(&[1.0, 2.0], &[1, -1]), -1);
}

#[test]
fn no_trial_beats_the_bayes_error() {
    let c = cfg(3, 3, 0.1, 2000);
    let report = run_proposition_experiment(&c, 20, &mut rng_from_seed(15), Execution::Parallel).unwrap();
    let floor = report.bayes_error - 3.0 * report.monte_carlo_sigma();
    for t in &report.trials {
        assert!(t.empirical_error >= floor, "{} < {floor}", t.empirical_error);
    }
    let seq = run_proposition_experiment(&c, 20, &mut rng_from_seed(15), Execution::Sequential).unwrap();
    assert_eq!(seq, report);
}

#[test]
fn error_falls_with_more_copies() {
    let errors: Vec<f64> = [1, 3, 5, 9]
        .iter()
        .map(|&k| run_trial(&cfg(4, k, 0.2, 5000), 100 + k as u64).unwrap().empirical_error)
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    for (e, k) in errors.iter().zip([1, 3, 5, 9]) {
        assert!((e - bayes_error(k, 0.2).unwrap()).abs() < 0.02, "k {k}: {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn iterates_stay_in_the_ball(seed in any::<u64>(), n in 1usize..5, k in 1usize..4, radius in 0.01f64..3.0) {
        let c = cfg(n, k, 0.1, 40);
        let train = generate_theory_dataset(&c, 40, &mut rng_from_seed(seed)).unwrap();
        let fit = train_constrained_logistic(&train, radius).unwrap();
        let norm = fit.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        prop_assert!(norm <= radius + 1e-9);
    }
}
