//! Drift trellis for the IDS channel: exact likelihoods, BCJR symbol posteriors and
//! TrellisBMA multi-trace fusion.
//!
//! A trellis state `(l, j)` means `l` original symbols consumed and `j` trace symbols
//! emitted; the drift is `j - l`, bounded by `d_max`. Moving from column `l - 1` to `l`
//! first runs through any number of insertions (each emits a uniform base with weight
//! `p_I / 4` and keeps `l`), then takes one terminal event: deletion (`p_D`, emits
//! nothing), substitution (`p_S / 3` per wrong base) or transmission (`p_T`). Runs of
//! insertions are summed in closed form with a running recursion, so an unbounded run
//! costs the same as a single step. With `max_insertions = Some(k)` runs are truncated at
//! `k` and the mass of longer runs is assigned to the length-`k` branch.
//!
//! Columns are rescaled to unit mass after every step; the log of the scale factors
//! carries the magnitude, which keeps long sequences free of underflow.

use crate::algorithms::Reconstruction;
use crate::channel::{ChannelParams, ErrorRates};
use crate::error::{Error, Result};
use crate::seq::{Base, DnaSequence, Trace};

/// Symbol prior per original position.
pub type Prior = [f64; 4];

const UNIFORM: Prior = [0.25; 4];
const FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrellisConfig {
    /// Drift bound; `None` picks [`default_drift_bound`].
    pub d_max: Option<usize>,
    /// Longest insertion run modeled per position; `None` is exact.
    pub max_insertions: Option<usize>,
}

/// `max(8, ceil(4 L (p_I + p_D)))`.
pub fn default_drift_bound(length: usize, rates: &ErrorRates) -> usize {
    let spread = (4.0 * length as f64 * (rates.insertion + rates.deletion)).ceil() as usize;
    spread.max(8)
}

/// Per-position distributions over {A, C, G, T}.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    rows: Vec<[f64; 4]>,
}

impl PosteriorMatrix {
    pub fn rows(&self) -> &[[f64; 4]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-position argmax (lowest base on ties).
    pub fn map_estimate(&self) -> DnaSequence {
        self.rows.iter().map(|row| Base::from_index(argmax(row))).collect()
    }
}

fn argmax(v: &[f64; 4]) -> usize {
    let mut best = 0;
    for i in 1..4 {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Forward/backward machinery for one trace against a length-`L` original.
struct TraceTrellis<'a> {
    trace: &'a [Base],
    length: usize,
    params: &'a ChannelParams,
    d_max: usize,
    max_insertions: Option<usize>,
}

/// `sum_a prior[a] * emission(a, observed)`.
#[inline]
fn mixed_emission(rates: &ErrorRates, prior: &Prior, observed: Base) -> f64 {
    let hit = prior[observed.index()];
    hit * rates.transmission() + (1.0 - hit) * rates.substitution / 3.0
}

fn normalize(v: &mut [f64]) -> Option<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 && total.is_finite() {
        v.iter_mut().for_each(|x| *x /= total);
        Some(total)
    } else {
        None
    }
}

struct Passes {
    /// Scaled forward columns, `(L + 1) x (m + 1)`.
    alpha: Vec<Vec<f64>>,
    /// Scaled backward columns.
    beta: Vec<Vec<f64>>,
    /// `ln P(y)`.
    log_likelihood: f64,
}

impl<'a> TraceTrellis<'a> {
    fn new(
        trace: &'a [Base],
        length: usize,
        params: &'a ChannelParams,
        cfg: &TrellisConfig,
    ) -> Result<Self> {
        params.validate()?;
        let d_max = cfg
            .d_max
            .unwrap_or_else(|| default_drift_bound(length, &params.rates));
        let needed = trace.len().abs_diff(length);
        if needed > d_max {
            return Err(Error::UnexplainableTrace {
                trace_len: trace.len(),
                length,
                d_max,
                needed,
            });
        }
        Ok(TraceTrellis {
            trace,
            length,
            params,
            d_max,
            max_insertions: cfg.max_insertions,
        })
    }

    fn m(&self) -> usize {
        self.trace.len()
    }

    /// Inclusive range of emitted counts allowed in column `l`.
    #[inline]
    fn band(&self, l: usize) -> (usize, usize) {
        (l.saturating_sub(self.d_max), (l + self.d_max).min(self.m()))
    }

    /// Per-run weights for truncated insertion runs.
    fn run_weights(&self, rates: &ErrorRates, k: usize) -> Vec<f64> {
        let q = rates.insertion / 4.0;
        let mut w: Vec<f64> = (0..=k).map(|i| q.powi(i as i32)).collect();
        if rates.insertion < 1.0 {
            w[k] /= 1.0 - rates.insertion;
        }
        w
    }

    /// Closes column `l - 1` under insertion runs: `out[j] = sum_i w_i v[j - i]`.
    fn insert_forward(&self, v: &[f64], l: usize, out: &mut [f64]) {
        let rates = self.params.rates_at(l - 1);
        let (lo, hi) = self.band(l - 1);
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.max_insertions {
            None => {
                let q = rates.insertion / 4.0;
                let mut run = 0.0;
                for j in lo..=hi {
                    run = v[j] + q * run;
                    out[j] = run;
                }
            }
            Some(k) => {
                let w = self.run_weights(rates, k);
                for j in lo..=hi {
                    out[j] = (0..=k.min(j - lo)).map(|i| w[i] * v[j - i]).sum();
                }
            }
        }
    }

    /// Adjoint of [`Self::insert_forward`]: `out[j] = sum_i w_i v[j + i]`.
    fn insert_backward(&self, v: &[f64], l: usize, out: &mut [f64]) {
        let rates = self.params.rates_at(l - 1);
        let (lo, hi) = self.band(l - 1);
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.max_insertions {
            None => {
                let q = rates.insertion / 4.0;
                let mut run = 0.0;
                for j in (lo..=hi).rev() {
                    run = v[j] + q * run;
                    out[j] = run;
                }
            }
            Some(k) => {
                let w = self.run_weights(rates, k);
                for j in lo..=hi {
                    out[j] = (0..=k.min(hi - j)).map(|i| w[i] * v[j + i]).sum();
                }
            }
        }
    }

    /// Terminal step from the insertion-closed column `run` (column `l - 1`) into
    /// column `l` with symbol prior `prior`.
    fn terminal_forward(&self, run: &[f64], l: usize, prior: &Prior, out: &mut [f64]) {
        let rates = self.params.rates_at(l - 1);
        let (lo, hi) = self.band(l);
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in lo..=hi {
            let mut v = rates.deletion * run[j];
            if j >= 1 {
                v += run[j - 1] * mixed_emission(rates, prior, self.trace[j - 1]);
            }
            out[j] = v;
        }
    }

    /// Adjoint of [`Self::terminal_forward`]: values on column `l - 1` (before the
    /// insertion closure) from backward column `next` at `l`.
    fn terminal_backward(&self, next: &[f64], l: usize, prior: &Prior, out: &mut [f64]) {
        let rates = self.params.rates_at(l - 1);
        let (lo, hi) = self.band(l - 1);
        let m = self.m();
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in lo..=hi {
            let mut v = rates.deletion * next[j];
            if j < m {
                v += mixed_emission(rates, prior, self.trace[j]) * next[j + 1];
            }
            out[j] = v;
        }
    }

    /// Unnormalized `P(x_l = a, y)` terms for position `l` given an insertion-closed
    /// forward column and a backward column at `l`.
    fn symbol_scores(&self, run: &[f64], next: &[f64], l: usize) -> [f64; 4] {
        let rates = self.params.rates_at(l - 1);
        let (lo, hi) = self.band(l - 1);
        let m = self.m();
        let mut deletion = 0.0;
        let mut scores = [0.0; 4];
        let tx = rates.transmission();
        let sub = rates.substitution / 3.0;
        for j in lo..=hi {
            let r = run[j];
            if r == 0.0 {
                continue;
            }
            deletion += r * next[j];
            if j < m {
                let carry = r * next[j + 1];
                let observed = self.trace[j].index();
                for (a, s) in scores.iter_mut().enumerate() {
                    *s += carry * if a == observed { tx } else { sub };
                }
            }
        }
        scores.map(|s| s + rates.deletion * deletion)
    }

    fn passes(&self, priors: &[Prior]) -> Result<Passes> {
        let (len, m) = (self.length, self.m());
        let width = m + 1;
        let mut alpha = vec![vec![0.0; width]; len + 1];
        let mut scales = vec![0.0; len + 1];
        alpha[0][0] = 1.0;
        let mut run = vec![0.0; width];
        let mut log_likelihood = 0.0;
        for l in 1..=len {
            self.insert_forward(&alpha[l - 1], l, &mut run);
            self.terminal_forward(&run, l, &priors[l - 1], &mut alpha[l]);
            let c = normalize(&mut alpha[l]).ok_or(Error::ImpossibleTrace)?;
            scales[l] = c;
            log_likelihood += c.ln();
        }
        let end = alpha[len][m];
        if end <= 0.0 {
            return Err(Error::ImpossibleTrace);
        }
        log_likelihood += end.ln();

        let mut beta = vec![vec![0.0; width]; len + 1];
        beta[len][m] = 1.0;
        let mut pre = vec![0.0; width];
        for l in (1..=len).rev() {
            self.terminal_backward(&beta[l], l, &priors[l - 1], &mut pre);
            let mut col = vec![0.0; width];
            self.insert_backward(&pre, l, &mut col);
            col.iter_mut().for_each(|x| *x /= scales[l]);
            beta[l - 1] = col;
        }
        Ok(Passes {
            alpha,
            beta,
            log_likelihood,
        })
    }

    fn posteriors(&self, priors: &[Prior]) -> Result<(PosteriorMatrix, f64)> {
        let passes = self.passes(priors)?;
        let mut run = vec![0.0; self.m() + 1];
        let mut rows = Vec::with_capacity(self.length);
        for l in 1..=self.length {
            self.insert_forward(&passes.alpha[l - 1], l, &mut run);
            let s = self.symbol_scores(&run, &passes.beta[l], l);
            let mut row = [0.0; 4];
            for a in 0..4 {
                row[a] = s[a] * priors[l - 1][a];
            }
            normalize(&mut row).ok_or(Error::ImpossibleTrace)?;
            rows.push(row);
        }
        Ok((PosteriorMatrix { rows }, passes.log_likelihood))
    }
}

/// Exact `ln P(y | x)` under the channel, including unbounded insertion runs.
pub fn channel_log_likelihood(x: &[Base], trace: &[Base], params: &ChannelParams) -> Result<f64> {
    if x.is_empty() {
        return Ok(if trace.is_empty() { 0.0 } else { f64::NEG_INFINITY });
    }
    let cfg = TrellisConfig {
        d_max: Some(x.len().max(trace.len())),
        max_insertions: None,
    };
    let trellis = TraceTrellis::new(trace, x.len(), params, &cfg)?;
    let priors: Vec<Prior> = x
        .iter()
        .map(|b| {
            let mut p = [0.0; 4];
            p[b.index()] = 1.0;
            p
        })
        .collect();
    match trellis.passes(&priors) {
        Ok(p) => Ok(p.log_likelihood),
        Err(Error::ImpossibleTrace) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Exact `P(y | x)`.
pub fn channel_likelihood(x: &[Base], trace: &[Base], params: &ChannelParams) -> Result<f64> {
    channel_log_likelihood(x, trace, params).map(f64::exp)
}

/// `P(x_l = a | y)` for every position under a uniform prior over `x`.
pub fn bcjr_posteriors(
    trace: &[Base],
    length: usize,
    params: &ChannelParams,
    cfg: &TrellisConfig,
) -> Result<PosteriorMatrix> {
    bcjr_posteriors_with_prior(trace, &vec![UNIFORM; length], params, cfg).map(|(p, _)| p)
}

/// Posteriors under an independent per-position prior, with `ln P(y)` under that prior.
pub fn bcjr_posteriors_with_prior(
    trace: &[Base],
    priors: &[Prior],
    params: &ChannelParams,
    cfg: &TrellisConfig,
) -> Result<(PosteriorMatrix, f64)> {
    if priors.is_empty() {
        return Err(Error::EmptySequence);
    }
    TraceTrellis::new(trace, priors.len(), params, cfg)?.posteriors(priors)
}

/// `ln P(y)` under a per-position prior (forward pass only).
pub fn marginal_log_likelihood(
    trace: &[Base],
    priors: &[Prior],
    params: &ChannelParams,
    cfg: &TrellisConfig,
) -> Result<f64> {
    TraceTrellis::new(trace, priors.len(), params, cfg)?
        .passes(priors)
        .map(|p| p.log_likelihood)
}

/// Fusion weights: `beta_b` on the prior, `beta_e` on look-ahead (trellis) beliefs and
/// `beta_i` on pointer (no look-ahead) beliefs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionParams {
    pub beta_b: f64,
    pub beta_e: f64,
    pub beta_i: f64,
}

impl FusionParams {
    /// Weights by cluster size: `{2,3} -> (0.1, 0.5)`, `{4,5} -> (1.0, 0.1)`,
    /// `{6,7} -> (0.5, 0.1)`, `{8,9} -> (0.5, 0.5)`, `10 -> (0.5, 0.0)` for
    /// `(beta_e, beta_i)`, and `beta_b = 0`. Sizes below 2 use the `{2,3}` row, sizes
    /// above 10 the `10` row.
    pub fn for_cluster_size(n: usize) -> Self {
        let (beta_e, beta_i) = match n {
            0..=3 => (0.1, 0.5),
            4 | 5 => (1.0, 0.1),
            6 | 7 => (0.5, 0.1),
            8 | 9 => (0.5, 0.5),
            _ => (0.5, 0.0),
        };
        FusionParams {
            beta_b: 0.0,
            beta_e,
            beta_i,
        }
    }
}

/// Per-trace state for the two decision-feedback sweeps.
struct FusionTrace<'a> {
    trellis: TraceTrellis<'a>,
    passes: Passes,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sweep {
    LeftToRight,
    RightToLeft,
}

/// TrellisBMA reconstruction.
///
/// Every trace gets a uniform-prior BCJR run. Decoding then sweeps left to right: at
/// position `l` each trace's forward column is conditioned on the symbols already decided.
/// Against the trace's uniform-prior backward column it gives a look-ahead belief over
/// `x_l`; its most likely pointer (emitted count) gives a hard vote for the trace symbol
/// under that pointer, trusted with probability `p_T`. The decided symbol maximizes
/// `beta_b ln prior + sum_traces (beta_e ln lookahead + beta_i ln pointer_vote)`.
/// A mirrored right-to-left sweep conditions the backward columns on decisions instead.
/// The first half of the estimate comes from the left-to-right sweep, the second half
/// from the right-to-left one, so each symbol is decided close to its sweep's start.
///
/// Traces the trellis cannot explain within the drift bound are left out with a
/// warning. A single usable trace returns its per-position MAP estimate.
pub fn trellis_bma(
    traces: &[Trace],
    length: usize,
    params: &ChannelParams,
    fusion: &FusionParams,
    cfg: &TrellisConfig,
) -> Result<Reconstruction> {
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    if length == 0 {
        return Err(Error::EmptySequence);
    }
    let priors = vec![UNIFORM; length];
    let mut usable = Vec::with_capacity(traces.len());
    let mut dropped = Vec::new();
    for (i, trace) in traces.iter().enumerate() {
        let built = TraceTrellis::new(trace, length, params, cfg)
            .and_then(|trellis| trellis.passes(&priors).map(|passes| FusionTrace { trellis, passes }));
        match built {
            Ok(t) => usable.push(t),
            Err(Error::UnexplainableTrace { .. } | Error::ImpossibleTrace) => dropped.push(i),
            Err(e) => return Err(e),
        }
    }
    if usable.is_empty() {
        return Err(Error::NoUsableTrace);
    }
    let warning = (!dropped.is_empty()).then(|| format!("traces {dropped:?} left out of the fusion"));

    if usable.len() == 1 {
        let t = &usable[0];
        let (post, _) = t.trellis.posteriors(&priors)?;
        return Ok(Reconstruction {
            estimate: post.map_estimate(),
            warning,
        });
    }

    let forward = fusion_sweep(&usable, length, fusion, Sweep::LeftToRight);
    let backward = fusion_sweep(&usable, length, fusion, Sweep::RightToLeft);
    let half = length.div_ceil(2);
    let estimate = forward[..half]
        .iter()
        .chain(&backward[half..])
        .copied()
        .collect();
    Ok(Reconstruction { estimate, warning })
}

fn fusion_sweep(
    traces: &[FusionTrace<'_>],
    length: usize,
    fusion: &FusionParams,
    sweep: Sweep,
) -> Vec<Base> {
    let n = traces.len();
    let width = |t: &FusionTrace<'_>| t.trellis.m() + 1;
    // conditioned columns: forward (left-to-right) or backward (right-to-left)
    let mut state: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            let mut v = vec![0.0; width(t)];
            match sweep {
                Sweep::LeftToRight => v[0] = 1.0,
                Sweep::RightToLeft => v[t.trellis.m()] = 1.0,
            }
            v
        })
        .collect();
    let mut alive = vec![true; n];
    let mut decided = vec![Base::A; length];
    let mut run: Vec<Vec<f64>> = traces.iter().map(|t| vec![0.0; width(t)]).collect();
    let mut scratch: Vec<Vec<f64>> = run.clone();

    let positions: Box<dyn Iterator<Item = usize>> = match sweep {
        Sweep::LeftToRight => Box::new(1..=length),
        Sweep::RightToLeft => Box::new((1..=length).rev()),
    };
    for l in positions {
        let mut total = [fusion.beta_b * 0.25f64.ln(); 4];
        for (i, t) in traces.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let tr = &t.trellis;
            let (look, pointed) = match sweep {
                Sweep::LeftToRight => {
                    tr.insert_forward(&state[i], l, &mut run[i]);
                    let look = tr.symbol_scores(&run[i], &t.passes.beta[l], l);
                    (look, tr.trace.get(first_argmax(&run[i])).copied())
                }
                Sweep::RightToLeft => {
                    tr.insert_forward(&t.passes.alpha[l - 1], l, &mut run[i]);
                    let look = tr.symbol_scores(&run[i], &state[i], l);
                    let j = first_argmax(&state[i]);
                    (look, j.checked_sub(1).map(|j| tr.trace[j]))
                }
            };
            add_log_belief(&mut total, &look, fusion.beta_e);
            if let Some(b) = pointed {
                let tx = tr.params.rates_at(l - 1).transmission();
                let mut vote = [(1.0 - tx) / 3.0; 4];
                vote[b.index()] = tx;
                add_log_belief(&mut total, &vote, fusion.beta_i);
            }
        }
        let choice = Base::from_index(argmax(&total));
        decided[l - 1] = choice;
        let mut prior = [0.0; 4];
        prior[choice.index()] = 1.0;
        for (i, t) in traces.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let tr = &t.trellis;
            match sweep {
                Sweep::LeftToRight => {
                    tr.terminal_forward(&run[i], l, &prior, &mut scratch[i]);
                }
                Sweep::RightToLeft => {
                    tr.terminal_backward(&state[i], l, &prior, &mut run[i]);
                    tr.insert_backward(&run[i], l, &mut scratch[i]);
                }
            }
            if normalize(&mut scratch[i]).is_some() {
                std::mem::swap(&mut state[i], &mut scratch[i]);
            } else {
                alive[i] = false;
            }
        }
        if !alive.iter().any(|&a| a) {
            alive.iter_mut().for_each(|a| *a = true);
            for (i, t) in traces.iter().enumerate() {
                // no trace can follow the decisions any more: fall back to the
                // unconditioned columns
                state[i] = match sweep {
                    Sweep::LeftToRight => t.passes.alpha[l].clone(),
                    Sweep::RightToLeft => t.passes.beta[l - 1].clone(),
                };
            }
        }
    }
    decided
}

/// Index of the largest entry, lowest on ties.
fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = j;
        }
    }
    best
}

/// Adds `weight * ln(normalized scores)`; zero weights contribute nothing.
fn add_log_belief(total: &mut [f64; 4], scores: &[f64; 4], weight: f64) {
    if weight == 0.0 {
        return;
    }
    let sum: f64 = scores.iter().sum();
    // also skips NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(sum > 0.0) {
        return;
    }
    for a in 0..4 {
        total[a] += weight * (scores[a] / sum).max(FLOOR).ln();
    }
}
