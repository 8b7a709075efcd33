mod common;

use proptest::prelude::*;
use trecon_core::channel::{
    corrupt, generate_cluster, generate_indexed, rng_from_seed, sample_params, sample_sequence,
    ChannelParams, ClusterSize, EditKind, EditScript, ErrorRates, GenerateConfig,
    NoiseDistribution,
};
use trecon_core::seq::dna;
use trecon_core::Base;

#[test]
fn zero_length_is_rejected() {
    assert!(sample_sequence(0, &mut rng_from_seed(1)).is_err());
}

#[test]
fn base_frequencies_are_uniform() {
    let mut rng = rng_from_seed(3);
    let mut counts = [0usize; 4];
    let draws = 100_000;
    for _ in 0..draws {
        for b in sample_sequence(110, &mut rng).unwrap().iter() {
            counts[b.index()] += 1;
        }
    }
    for c in counts {
        let f = c as f64 / (110 * draws) as f64;
        assert!((f - 0.25).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn noiseless_and_total_deletion_channels() {
    let x = dna("ACGTTGCA");
    let mut rng = rng_from_seed(4);
    let (y, script) = corrupt(&x, &ChannelParams::noiseless(), &mut rng);
    assert_eq!(y, x);
    assert!(script.events.iter().all(|e| e.kind == EditKind::Match));
    let all_deleted = ChannelParams::new(ErrorRates::new(0.0, 1.0, 0.0).unwrap()).unwrap();
    let (y, script) = corrupt(&x, &all_deleted, &mut rng);
    assert!(y.is_empty());
    assert_eq!(script.events.len(), 8);
    assert!(script.events.iter().all(|e| e.kind == EditKind::Delete));
}

#[test]
fn mean_trace_length_follows_length_law() {
    let params = ChannelParams::new(ErrorRates::new(0.05, 0.05, 0.02).unwrap()).unwrap();
    let mut rng = rng_from_seed(8);
    let x = sample_sequence(110, &mut rng).unwrap();
    let draws = 20_000;
    let lens: Vec<f64> = (0..draws)
        .map(|_| corrupt(&x, &params, &mut rng).0.len() as f64)
        .collect();
    let mean = lens.iter().sum::<f64>() / draws as f64;
    let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let expected = 110.0 * 0.95 / 0.95;
    assert!((mean - expected).abs() < 3.0 * (var / draws as f64).sqrt(), "{mean}");
}

#[test]
fn sweep_levels_shift_the_parameter_interval() {
    let mut rng = rng_from_seed(9);
    for (k, lo, hi) in [(0, 0.01, 0.10), (10, 0.11, 0.20)] {
        for _ in 0..2000 {
            let r = sample_params(&NoiseDistribution::standard(k), &mut rng).unwrap().rates;
            for p in [r.insertion, r.deletion, r.substitution] {
                assert!(p >= lo - 1e-12 && p <= hi + 1e-12, "k = {k}: {p}");
            }
        }
    }
    let r = sample_params(&NoiseDistribution::point(0.05), &mut rng).unwrap().rates;
    assert_eq!(r, ErrorRates::uniform(0.05));
    let out_of_range = NoiseDistribution {
        lower: 0.5,
        upper: 0.9,
        level: 20,
    };
    assert!(sample_params(&out_of_range, &mut rng).is_err());
}

#[test]
fn cluster_sizes_are_uniform_over_range() {
    let cfg = GenerateConfig::new(10, ClusterSize::Range(2..=10), NoiseDistribution::standard(0));
    let mut counts = [0usize; 11];
    for i in 0..10_000 {
        counts[generate_indexed(&cfg, 21, i).unwrap().len()] += 1;
    }
    for (n, &count) in counts.iter().enumerate().skip(2) {
        let f = count as f64 / 10_000.0;
        assert!((f - 1.0 / 9.0).abs() < 0.02, "N = {n}: {f}");
    }
    let mut rng = rng_from_seed(1);
    let c = generate_cluster(10, &ClusterSize::Fixed(3), &NoiseDistribution::standard(0), &mut rng).unwrap();
    assert_eq!(c.len(), 3);
    assert!(generate_cluster(10, &ClusterSize::Range(std::ops::RangeInclusive::new(5, 4)), &NoiseDistribution::standard(0), &mut rng).is_err());
}

#[test]
fn zero_noise_clusters_copy_the_ground_truth() {
    let cfg = GenerateConfig::new(40, ClusterSize::Range(2..=10), NoiseDistribution::point(0.0));
    for i in 0..20 {
        let c = generate_indexed(&cfg, 2, i).unwrap();
        assert!(c.traces.iter().all(|t| *t == c.ground_truth));
    }
}

#[test]
fn clusters_share_one_parameter_draw() {
    let cfg = GenerateConfig::new(20, ClusterSize::Fixed(4), NoiseDistribution::standard(3));
    let a = generate_indexed(&cfg, 5, 0).unwrap();
    let b = generate_indexed(&cfg, 5, 1).unwrap();
    assert_ne!(a.params, b.params);
    assert_eq!(a, generate_indexed(&cfg, 5, 0).unwrap());
}

#[test]
fn tail_profile_triples_insertions() {
    let len = 60;
    let base = ErrorRates::uniform(0.1);
    let flat = ChannelParams::new(base).unwrap();
    let tail = flat
        .clone()
        .with_tail(len, 10, ErrorRates::new(0.3, 0.1, 0.1).unwrap())
        .unwrap();
    let tail_insertions = |params: &ChannelParams, seed| {
        let mut rng = rng_from_seed(seed);
        let x = sample_sequence(len, &mut rng).unwrap();
        (0..20_000)
            .map(|_| {
                let (_, script) = corrupt(&x, params, &mut rng);
                script
                    .events
                    .iter()
                    .filter(|e| e.position >= len - 10 && matches!(e.kind, EditKind::Insert(_)))
                    .count()
            })
            .sum::<usize>() as f64
    };
    // expected insertions per position are p_I / (1 - p_I): 0.111 flat, 0.4286 in the tail
    let ratio = tail_insertions(&tail, 1) / tail_insertions(&flat, 2);
    let expected = (0.3 / 0.7) / (0.1 / 0.9);
    assert!((ratio / expected - 1.0).abs() < 0.05, "{ratio}");
    assert!(ratio > 3.0);
}

fn rates() -> impl Strategy<Value = ErrorRates> {
    (0.0f64..0.33, 0.0f64..0.33, 0.0f64..0.33)
        .prop_map(|(i, d, s)| ErrorRates::new(i, d, s).unwrap())
}

fn base() -> impl Strategy<Value = Base> {
    (0usize..4).prop_map(Base::from_index)
}

proptest! {
    #[test]
    fn edit_scripts_replay_exactly(
        x in prop::collection::vec(base(), 1..80),
        r in rates(),
        seed in any::<u64>(),
    ) {
        let params = ChannelParams::new(r).unwrap();
        let (y, script) = corrupt(&x, &params, &mut rng_from_seed(seed));
        prop_assert_eq!(script.replay(&x).unwrap(), y);
        let compact = script.to_compact();
        prop_assert_eq!(EditScript::parse_compact(&compact).unwrap(), script.clone());
        // positions never decrease and each one closes with exactly one terminal event
        let mut terminals = vec![0usize; x.len()];
        for w in script.events.windows(2) {
            prop_assert!(w[0].position <= w[1].position);
        }
        for e in &script.events {
            if e.kind.is_terminal() {
                terminals[e.position] += 1;
            }
        }
        prop_assert!(terminals.iter().all(|&t| t == 1));
    }

    #[test]
    fn generation_is_seed_deterministic(master in any::<u64>(), index in 0u64..1000) {
        let cfg = GenerateConfig::new(30, ClusterSize::Range(2..=10), NoiseDistribution::standard(2));
        prop_assert_eq!(
            generate_indexed(&cfg, master, index).unwrap(),
            generate_indexed(&cfg, master, index).unwrap()
        );
    }
}
