//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use trecon_core::channel::{
    corrupt, derive_seed, generate_indexed, rng_from_seed, sample_sequence, ChannelParams,
    Cluster, ClusterSize, ErrorRates, GenerateConfig, NoiseDistribution,
};
use trecon_core::{Base, DnaSequence};

/// Every sequence of length `len`, in lexicographic A < C < G < T order.
pub fn all_sequences(len: usize) -> Vec<DnaSequence> {
    let total = 4usize.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let mut bases = vec![Base::A; len];
            for slot in bases.iter_mut().rev() {
                *slot = Base::from_index(code % 4);
                code /= 4;
            }
            DnaSequence::new(bases)
        })
        .collect()
}

/// Every sequence of length at most `max_len`.
pub fn all_sequences_up_to(max_len: usize) -> Vec<DnaSequence> {
    (0..=max_len).flat_map(all_sequences).collect()
}

/// P(y | x) by plain recursion over the per-base event loop, no memoization, no scaling.
pub fn brute_likelihood(x: &[Base], y: &[Base], r: &ErrorRates) -> f64 {
    if x.is_empty() {
        return if y.is_empty() { 1.0 } else { 0.0 };
    }
    let mut total = r.deletion * brute_likelihood(&x[1..], y, r);
    if let Some((&first, rest)) = y.split_first() {
        total += r.insertion * 0.25 * brute_likelihood(x, rest, r);
        let emit = if first == x[0] {
            r.transmission()
        } else {
            r.substitution / 3.0
        };
        total += emit * brute_likelihood(&x[1..], rest, r);
    }
    total
}

/// Unit-cost edit distance straight from its recursive definition, memoized on suffixes.
pub fn recursive_levenshtein(a: &[Base], b: &[Base]) -> usize {
    fn go(a: &[Base], b: &[Base], memo: &mut Vec<Option<usize>>, w: usize) -> usize {
        let key = a.len() * w + b.len();
        if let Some(v) = memo[key] {
            return v;
        }
        let v = if a.is_empty() {
            b.len()
        } else if b.is_empty() {
            a.len()
        } else {
            let sub = go(&a[1..], &b[1..], memo, w) + usize::from(a[0] != b[0]);
            let del = go(&a[1..], b, memo, w) + 1;
            let ins = go(a, &b[1..], memo, w) + 1;
            sub.min(del).min(ins)
        };
        memo[key] = Some(v);
        v
    }
    let w = b.len() + 1;
    let mut memo = vec![None; (a.len() + 1) * w];
    go(a, b, &mut memo, w)
}

/// `count` clusters of fixed size `n` at sweep level `k`, seeded by `master`.
pub fn clusters(length: usize, n: usize, k: u32, count: u64, master: u64) -> Vec<Cluster> {
    let cfg = GenerateConfig::new(length, ClusterSize::Fixed(n), NoiseDistribution::standard(k));
    (0..count)
        .map(|i| generate_indexed(&cfg, master, i).expect("valid config"))
        .collect()
}

/// Clusters at fixed error rates (no per-cluster draw), seeded by `master`.
pub fn point_clusters(length: usize, n: usize, rates: ErrorRates, count: u64, master: u64) -> Vec<Cluster> {
    let params = ChannelParams::new(rates).expect("valid rates");
    (0..count)
        .map(|i| {
            let seed = derive_seed(master, i);
            let mut rng = rng_from_seed(seed);
            let x = sample_sequence(length, &mut rng).expect("positive length");
            let (traces, edits): (Vec<_>, Vec<_>) = (0..n).map(|_| corrupt(&x, &params, &mut rng)).unzip();
            Cluster {
                ground_truth: x,
                traces,
                edits: Some(edits),
                params: params.clone(),
                seed,
            }
        })
        .collect()
}
