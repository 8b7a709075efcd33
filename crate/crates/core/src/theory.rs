//! Substitution-only binary model for the generalization experiment.
//!
//! A clean sequence `x in {-1, +1}^n` is copied `k` times through a binary symmetric
//! channel with flip probability `p`; the features are the `k n` noisy coordinates and
//! the label is the first clean bit. A norm-constrained logistic regression is trained
//! on `N` examples and compared against the majority-vote Bayes error and the
//! Rademacher-style risk bound
//! `exp(-2k(1/2 - p)^2) + (8 B R + 6 sqrt(ln(2/delta) / 2)) / sqrt(N)`
//! with `B = R = sqrt(k n)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoryConfig {
    /// Sequence length in bits.
    pub n: usize,
    /// Copies available.
    pub m: usize,
    /// Copies used by the estimator.
    pub k: usize,
    /// Flip probability.
    pub p: f64,
    /// Training examples.
    pub samples: usize,
    pub delta: f64,
}

impl TheoryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 || self.k == 0 {
            return bad("n and k must be at least 1".into());
        }
        if self.k > self.m {
            return bad(format!("k = {} exceeds m = {}", self.k, self.m));
        }
        if !(0.0..0.5).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1/2)", self.p));
        }
        if self.samples == 0 {
            return bad("at least one training example is required".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} outside (0, 1)", self.delta));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.k * self.n
    }

    /// Weight-norm bound `B = sqrt(k n)`.
    pub fn weight_bound(&self) -> f64 {
        (self.dim() as f64).sqrt()
    }

    /// Input-norm bound `R = sqrt(k n)`.
    pub fn input_bound(&self) -> f64 {
        (self.dim() as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TheoryExample {
    /// `k` noisy copies, concatenated.
    pub features: Vec<i8>,
    pub label: i8,
}

fn sign(bit: bool) -> i8 {
    if bit {
        1
    } else {
        -1
    }
}

fn draw_example<R: Rng + ?Sized>(cfg: &TheoryConfig, rng: &mut R) -> TheoryExample {
    let clean: Vec<i8> = (0..cfg.n).map(|_| sign(rng.gen())).collect();
    let mut features = Vec::with_capacity(cfg.dim());
    for _ in 0..cfg.k {
        for &b in &clean {
            features.push(if rng.gen_bool(cfg.p) { -b } else { b });
        }
    }
    TheoryExample {
        features,
        label: clean[0],
    }
}

pub fn generate_theory_dataset<R: Rng + ?Sized>(
    cfg: &TheoryConfig,
    count: usize,
    rng: &mut R,
) -> Result<Vec<TheoryExample>> {
    cfg.validate()?;
    Ok((0..count).map(|_| draw_example(cfg, rng)).collect())
}

/// Probability that at least half of `k` coordinates flip.
pub fn bayes_error(k: usize, p: f64) -> Result<f64> {
    if k == 0 || !(0.0..0.5).contains(&p) {
        return Err(Error::InvalidConfig(format!("bayes_error needs k >= 1 and p in [0, 1/2), got k = {k}, p = {p}")));
    }
    let mut total = 0.0;
    let mut binom = 1.0f64;
    for b in 0..=k {
        if b > 0 {
            binom = binom * (k - b + 1) as f64 / b as f64;
        }
        if 2 * b >= k {
            total += binom * p.powi(b as i32) * (1.0 - p).powi((k - b) as i32);
        }
    }
    Ok(total)
}

pub fn bound_value(cfg: &TheoryConfig) -> Result<f64> {
    cfg.validate()?;
    let k = cfg.k as f64;
    let margin = 0.5 - cfg.p;
    let bias = (-2.0 * k * margin * margin).exp();
    let complexity = 8.0 * cfg.weight_bound() * cfg.input_bound()
        + 6.0 * ((2.0 / cfg.delta).ln() / 2.0).sqrt();
    Ok(bias + complexity / (cfg.samples as f64).sqrt())
}

/// Training examples with duplicates merged into weights.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl DesignMatrix {
    pub fn new(examples: &[TheoryExample]) -> Result<Self> {
        let dim = examples.first().map(|e| e.features.len()).ok_or(Error::InvalidConfig(
            "no training examples".into(),
        ))?;
        let mut counts: HashMap<&TheoryExample, usize> = HashMap::new();
        let mut order = Vec::new();
        for e in examples {
            if e.features.len() != dim {
                return Err(Error::InvalidConfig("examples differ in dimension".into()));
            }
            let c = counts.entry(e).or_insert(0);
            if *c == 0 {
                order.push(e);
            }
            *c += 1;
        }
        let mut rows = Vec::with_capacity(order.len() * dim);
        let mut labels = Vec::with_capacity(order.len());
        let mut weights = Vec::with_capacity(order.len());
        for e in order {
            rows.extend(e.features.iter().map(|&v| f64::from(v)));
            labels.push(f64::from(e.label));
            weights.push(counts[e] as f64);
        }
        Ok(DesignMatrix {
            dim,
            rows,
            labels,
            weights,
            total: examples.len() as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn margins(&self, w: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = w.to_vec();
        self.rows
            .chunks_exact(self.dim)
            .enumerate()
            .map(move |(i, row)| (i, self.labels[i] * dot(row, &w)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^{-m})` without overflow.
fn logistic_loss(margin: f64) -> f64 {
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// `1 / (1 + e^{m})`.
fn sigmoid_neg(margin: f64) -> f64 {
    if margin > 0.0 {
        let e = (-margin).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + margin.exp())
    }
}

/// Mean logistic loss.
pub fn empirical_risk(data: &DesignMatrix, w: &[f64]) -> f64 {
    data.margins(w)
        .map(|(i, m)| data.weights[i] * logistic_loss(m))
        .sum::<f64>()
        / data.total
}

/// Gradient of [`empirical_risk`].
pub fn risk_gradient(data: &DesignMatrix, w: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; data.dim];
    risk_and_gradient(data, w, &mut g);
    g
}

fn risk_and_gradient(data: &DesignMatrix, w: &[f64], g: &mut [f64]) -> f64 {
    g.iter_mut().for_each(|x| *x = 0.0);
    let mut risk = 0.0;
    for (i, row) in data.rows.chunks_exact(data.dim).enumerate() {
        let y = data.labels[i];
        let m = y * dot(row, w);
        let c = data.weights[i];
        risk += c * logistic_loss(m);
        let coef = -c * y * sigmoid_neg(m);
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += coef * xj;
        }
    }
    let inv = 1.0 / data.total;
    g.iter_mut().for_each(|x| *x *= inv);
    risk * inv
}

fn project(w: &mut [f64], radius: f64) {
    let norm = dot(w, w).sqrt();
    if norm > radius {
        let s = radius / norm;
        w.iter_mut().for_each(|x| *x *= s);
    }
}

pub const MAX_ITERATIONS: usize = 10_000;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    pub weights: Vec<f64>,
    pub risk: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

/// Full-batch projected gradient descent on the logistic risk over `||w|| <= radius`,
/// step `1 / R^2` with `R^2` the largest squared input norm. Stops once an iteration
/// improves the risk by less than [`TOLERANCE`].
pub fn train_constrained_logistic(examples: &[TheoryExample], radius: f64) -> Result<TrainResult> {
    // also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!("norm bound must be positive, got {radius}")));
    }
    let data = DesignMatrix::new(examples)?;
    let r2 = data
        .rows
        .chunks_exact(data.dim)
        .map(|row| dot(row, row))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let step = 1.0 / r2;
    let mut w = vec![0.0; data.dim];
    let mut g = vec![0.0; data.dim];
    let mut risk = risk_and_gradient(&data, &w, &mut g);
    for it in 1..=MAX_ITERATIONS {
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= step * gj;
        }
        project(&mut w, radius);
        let next = risk_and_gradient(&data, &w, &mut g);
        let improvement = risk - next;
        risk = next;
        if improvement < TOLERANCE {
            return Ok(TrainResult {
                weights: w,
                risk,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(TrainResult {
        weights: w,
        risk,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// `sign(w . x)`, with 0 mapped to `+1`.
pub fn classify(w: &[f64], features: &[i8]) -> i8 {
    let z: f64 = w.iter().zip(features).map(|(a, &b)| a * f64::from(b)).sum();
    if z >= 0.0 {
        1
    } else {
        -1
    }
}

/// 0/1 error of `w` on `count` fresh examples, streamed.
pub fn test_error<R: Rng + ?Sized>(cfg: &TheoryConfig, w: &[f64], count: usize, rng: &mut R) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let wrong = (0..count)
        .filter(|_| {
            let e = draw_example(cfg, rng);
            classify(w, &e.features) != e.label
        })
        .count();
    wrong as f64 / count as f64
}

/// Fresh test examples per training example.
pub const TEST_FACTOR: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub empirical_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropositionReport {
    pub config: TheoryConfig,
    pub bayes_error: f64,
    pub bound: f64,
    pub test_examples: usize,
    pub trials: Vec<TrialResult>,
}

impl PropositionReport {
    pub fn mean_error(&self) -> f64 {
        self.trials.iter().map(|t| t.empirical_error).sum::<f64>() / self.trials.len() as f64
    }

    /// Trials whose empirical error is at most the bound.
    pub fn within_bound(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.empirical_error <= self.bound)
            .count()
    }

    /// Binomial standard error of one trial's test estimate at the Bayes error.
    pub fn monte_carlo_sigma(&self) -> f64 {
        (self.bayes_error * (1.0 - self.bayes_error) / self.test_examples as f64).sqrt()
    }
}

/// One training run with its own seed.
pub fn run_trial(cfg: &TheoryConfig, seed: u64) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = generate_theory_dataset(cfg, cfg.samples, &mut rng)?;
    let fit = train_constrained_logistic(&train, cfg.weight_bound())?;
    drop(train);
    let err = test_error(cfg, &fit.weights, TEST_FACTOR * cfg.samples, &mut rng);
    Ok(TrialResult {
        seed,
        empirical_error: err,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Runs `trials` independent trials; trial seeds are drawn from `rng` up front, so the
/// result does not depend on `exec`.
pub fn run_proposition_experiment<R: Rng + ?Sized>(
    cfg: &TheoryConfig,
    trials: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<PropositionReport> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let seeds: Vec<u64> = (0..trials).map(|_| rng.gen()).collect();
    let results = exec.map(&seeds, |&s| run_trial(cfg, s));
    Ok(PropositionReport {
        config: *cfg,
        bayes_error: bayes_error(cfg.k, cfg.p)?,
        bound: bound_value(cfg)?,
        test_examples: TEST_FACTOR * cfg.samples,
        trials: results.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize, p: f64, samples: usize) -> TheoryConfig {
        TheoryConfig {
            n,
            m: k,
            k,
            p,
            samples,
            delta: 0.1,
        }
    }

    #[test]
    fn bayes_examples() {
        assert!((bayes_error(1, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!((bayes_error(3, 0.1).unwrap() - 0.028).abs() < 1e-15);
        assert!(bayes_error(0, 0.1).is_err());
        assert!(bayes_error(3, 0.5).is_err());
    }

    #[test]
    fn bound_example() {
        let c = cfg(4, 2, 0.1, 10_000);
        let expected = (-0.64f64).exp() + (64.0 + 6.0 * (20f64.ln() / 2.0).sqrt()) / 100.0;
        let got = bound_value(&c).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.2407).abs() < 1e-4);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(4, 2, 0.1, 10);
        c.m = 1;
        assert!(c.validate().is_err());
        assert!(cfg(4, 2, 0.5, 10).validate().is_err());
        assert!(cfg(0, 2, 0.1, 10).validate().is_err());
    }

    #[test]
    fn noiseless_copies() {
        let c = cfg(5, 3, 0.0, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for e in generate_theory_dataset(&c, 20, &mut rng).unwrap() {
            assert_eq!(e.label, e.features[0]);
            assert_eq!(&e.features[..5], &e.features[5..10]);
            assert_eq!(&e.features[..5], &e.features[10..]);
        }
    }

    #[test]
    fn projection_holds() {
        let c = cfg(3, 2, 0.0, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = generate_theory_dataset(&c, 200, &mut rng).unwrap();
        let fit = train_constrained_logistic(&data, 0.5).unwrap();
        assert!(dot(&fit.weights, &fit.weights).sqrt() <= 0.5 + 1e-9);
    }

    #[test]
    fn zero_dot_is_positive() {
        assert_eq!(classify(&[0.0, 0.0], &[1, -1]), 1);
        assert_eq!(classify(&[1.0, 1.0], &[1, -1]), 1);
        assert_eq!(classify(&[1.0, 2.0], &[1, -1]), -1);
    }
}
