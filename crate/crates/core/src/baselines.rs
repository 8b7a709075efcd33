//! Cursor-based majority reconstruction: BMA, BMA with look-ahead (BMALA) and the
//! threshold/resynchronization variant of Viswanathan and Swaminathan (VS).
//!
//! All three walk one cursor per trace through the cluster and emit one symbol per step.
//! A trace whose cursor has passed its end abstains from every later vote, and vote
//! fractions are taken over the traces still voting. Pluralities are broken by the base
//! order A < C < G < T. Each algorithm emits exactly `L` symbols: if every trace is
//! exhausted early the estimate is padded with `A`.
//!
//! The three differ in how a trace that disagrees with the emitted symbol moves:
//!
//! * BMA holds the cursor (the trace is assumed to have lost the symbol);
//! * BMALA compares the trace with the `w`-symbol look-ahead of the agreeing traces
//!   under substitution (advance 1), deletion (hold) and insertion (advance 2) and takes
//!   the best-scoring hypothesis (see [`bmala`]);
//! * VS scores substitution plus deletion and insertion runs of up to `r` symbols by
//!   their agreement with an `l`-symbol look-ahead, accepts the best one when the
//!   agreement reaches `gamma`, and otherwise treats the mismatch as a substitution.
//!   A step whose plurality fraction is below `delta` is ambiguous: each candidate symbol
//!   is scored by how many traces it explains (agreeing traces plus disagreeing traces
//!   with an accepted hypothesis); ties go to the larger vote count, then to the
//!   candidate shown by the earliest trace.
//!
//! BMALA and VS decode from both ends: one pass over the traces, one over the reversed
//! traces, and the estimate joins the first half of the forward pass with the second
//! half of the backward one. Cursor errors accumulate along a pass, so each half comes
//! from the pass that reaches it first. BMA is the one-directional original.

use crate::algorithms::Reconstruction;
use crate::seq::{Base, DnaSequence, Trace};

/// Look-ahead window used for BMALA.
pub const BMALA_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VsParams {
    /// Minimum plurality fraction for an unambiguous step, `(1 + p_S) / 2`.
    pub delta: f64,
    /// Minimum look-ahead agreement for accepting a resynchronization hypothesis.
    pub gamma: f64,
    /// Longest insertion or deletion run tried while resynchronizing.
    pub max_shift: usize,
    /// Look-ahead length.
    pub lookahead: usize,
}

impl VsParams {
    pub fn from_substitution(p_s: f64) -> Self {
        VsParams {
            delta: (1.0 + p_s) / 2.0,
            gamma: 0.75,
            max_shift: 2,
            lookahead: 5,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.5..=1.0).contains(&self.delta)
            && (0.0..=1.0).contains(&self.gamma)
            && self.lookahead >= 1
    }
}

struct Cursors<'a> {
    traces: &'a [Trace],
    pos: Vec<usize>,
}

impl<'a> Cursors<'a> {
    fn new(traces: &'a [Trace]) -> Self {
        Cursors {
            traces,
            pos: vec![0; traces.len()],
        }
    }

    #[inline]
    fn at(&self, i: usize, offset: usize) -> Option<Base> {
        self.traces[i].get(self.pos[i] + offset).copied()
    }

    #[inline]
    fn current(&self, i: usize) -> Option<Base> {
        self.at(i, 0)
    }

    fn advance(&mut self, i: usize, by: usize) {
        self.pos[i] = (self.pos[i] + by).min(self.traces[i].len());
    }

    /// Vote counts over the current symbols of the traces still voting.
    fn counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for i in 0..self.traces.len() {
            if let Some(b) = self.current(i) {
                counts[b.index()] += 1;
            }
        }
        counts
    }

    /// Plurality per look-ahead offset `1..=len` over the traces currently on `symbol`.
    fn lookahead(&self, symbol: Base, len: usize) -> Vec<Option<Base>> {
        (1..=len)
            .map(|o| {
                let mut counts = [0usize; 4];
                for i in 0..self.traces.len() {
                    if self.current(i) == Some(symbol) {
                        if let Some(b) = self.at(i, o) {
                            counts[b.index()] += 1;
                        }
                    }
                }
                plurality(&counts).map(|(b, _)| b)
            })
            .collect()
    }
}

/// Highest count, lowest base on ties; `None` if all counts are zero.
fn plurality(counts: &[usize; 4]) -> Option<(Base, usize)> {
    let (best, &votes) = counts
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|&(_, c)| *c)
        .expect("four bases");
    (votes > 0).then(|| (Base::from_index(best), votes))
}

fn finish(out: Vec<Base>, traces: &[Trace], length: usize) -> Reconstruction {
    let warning = traces
        .iter()
        .all(|t| t.is_empty())
        .then(|| "all traces are empty; emitting the all-A sequence".to_string());
    Reconstruction {
        estimate: DnaSequence::new(out).fit_to_length(length),
        warning,
    }
}

/// Runs `pass` on the traces and on their reversals and joins the first half of the
/// forward estimate with the second half of the reversed one.
fn two_sided(traces: &[Trace], length: usize, pass: impl Fn(&[Trace]) -> Vec<Base>) -> Reconstruction {
    let forward = pass(traces);
    let reversed: Vec<Trace> = traces.iter().map(|t| t.iter().rev().copied().collect()).collect();
    let backward = pass(&reversed);
    let half = length.div_ceil(2);
    let out = forward[..half]
        .iter()
        .chain(backward[..length - half].iter().rev())
        .copied()
        .collect();
    finish(out, traces, length)
}

/// Bitwise majority alignment.
pub fn bma(traces: &[Trace], length: usize) -> Reconstruction {
    finish(bma_pass(traces, length), traces, length)
}

fn bma_pass(traces: &[Trace], length: usize) -> Vec<Base> {
    let mut cursors = Cursors::new(traces);
    let mut out = Vec::with_capacity(length);
    while out.len() < length {
        let Some((symbol, _)) = plurality(&cursors.counts()) else {
            break;
        };
        out.push(symbol);
        for i in 0..traces.len() {
            if cursors.current(i) == Some(symbol) {
                cursors.advance(i, 1);
            }
        }
    }
    out.resize(length, Base::A);
    out
}

/// Cursor move for a trace disagreeing with `symbol`. Each hypothesis is scored over
/// the emitted symbol and its look-ahead: substitution and deletion account for the
/// emitted symbol and compare the trace from `p + 1` and `p` respectively; insertion
/// needs `trace[p + 1] == symbol` for that slot and compares from `p + 2`. The best
/// score wins, ties going to substitution, then deletion, then insertion.
fn bmala_move(trace: &Trace, p: usize, symbol: Base, reference: &[Option<Base>]) -> usize {
    let score = |start: usize| matches_at(trace, start, reference);
    let substitution = 1 + score(p + 1);
    let deletion = 1 + score(p);
    let insertion = usize::from(trace.get(p + 1) == Some(&symbol)) + score(p + 2);
    let mut best = (1, substitution);
    if deletion > best.1 {
        best = (0, deletion);
    }
    if insertion > best.1 {
        best = (2, insertion);
    }
    best.0
}

fn matches_at(trace: &Trace, start: usize, reference: &[Option<Base>]) -> usize {
    reference
        .iter()
        .enumerate()
        .filter(|&(o, r)| r.is_some() && trace.get(start + o) == r.as_ref())
        .count()
}

/// BMA with a look-ahead window of `window` symbols, decoded from both ends.
pub fn bmala(traces: &[Trace], length: usize, window: usize) -> Reconstruction {
    let window = window.max(1);
    two_sided(traces, length, |ts| bmala_pass(ts, length, window))
}

fn bmala_pass(traces: &[Trace], length: usize, window: usize) -> Vec<Base> {
    let mut cursors = Cursors::new(traces);
    let mut out = Vec::with_capacity(length);
    while out.len() < length {
        let Some((symbol, _)) = plurality(&cursors.counts()) else {
            break;
        };
        out.push(symbol);
        let reference = cursors.lookahead(symbol, window);
        let mut moves = vec![0usize; traces.len()];
        for (i, step) in moves.iter_mut().enumerate() {
            let Some(current) = cursors.current(i) else {
                continue;
            };
            let p = cursors.pos[i];
            let trace = &traces[i];
            *step = if current == symbol {
                1
            } else {
                bmala_move(trace, p, symbol, &reference)
            };
        }
        for (i, step) in moves.into_iter().enumerate() {
            cursors.advance(i, step);
        }
    }
    out.resize(length, Base::A);
    out
}

/// Fraction of defined look-ahead symbols matched by the trace from `start`; `None` if
/// nothing could be compared.
fn agreement(trace: &Trace, start: usize, reference: &[Option<Base>]) -> Option<f64> {
    let mut compared = 0usize;
    let mut matched = 0usize;
    for (o, r) in reference.iter().enumerate() {
        if let (Some(r), Some(t)) = (r, trace.get(start + o)) {
            compared += 1;
            matched += usize::from(r == t);
        }
    }
    (compared > 0).then(|| matched as f64 / compared as f64)
}

/// Best resynchronization move for a trace that disagrees with `symbol`, with whether
/// the move reached the agreement threshold.
fn vs_resync(
    trace: &Trace,
    p: usize,
    symbol: Base,
    reference: &[Option<Base>],
    params: &VsParams,
) -> (usize, bool) {
    // candidates in preference order: (cursor advance, agreement)
    let mut best: Option<(usize, f64)> = None;
    let mut consider = |advance: usize, score: Option<f64>| {
        if let Some(score) = score {
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((advance, score));
            }
        }
    };
    consider(1, agreement(trace, p + 1, reference));
    for shift in 1..=params.max_shift {
        // `shift` deleted symbols: the current symbol belongs `shift` positions ahead
        if shift <= reference.len() {
            consider(0, agreement(trace, p, &reference[shift - 1..]));
        }
        // `shift` inserted symbols before the emitted one
        if trace.get(p + shift) == Some(&symbol) {
            consider(shift + 1, agreement(trace, p + shift + 1, reference));
        }
    }
    match best {
        Some((advance, score)) if score >= params.gamma => (advance, true),
        _ => (1, false),
    }
}

/// Viswanathan-Swaminathan reconstruction with threshold `delta`, agreement `gamma`,
/// shift bound `r` and look-ahead `l`.
pub fn vs(traces: &[Trace], length: usize, params: &VsParams) -> Reconstruction {
    two_sided(traces, length, |ts| vs_pass(ts, length, params))
}

fn vs_pass(traces: &[Trace], length: usize, params: &VsParams) -> Vec<Base> {
    let mut cursors = Cursors::new(traces);
    let mut out = Vec::with_capacity(length);
    let look = params.lookahead.max(1);
    while out.len() < length {
        let counts = cursors.counts();
        let voters: usize = counts.iter().sum();
        let Some((mut symbol, votes)) = plurality(&counts) else {
            break;
        };
        if (votes as f64) < params.delta * voters as f64 {
            symbol = vs_ambiguous(&cursors, &counts, look, params);
        }
        out.push(symbol);
        let reference = cursors.lookahead(symbol, look);
        let moves: Vec<usize> = (0..traces.len())
            .map(|i| match cursors.current(i) {
                None => 0,
                Some(b) if b == symbol => 1,
                Some(_) => vs_resync(&traces[i], cursors.pos[i], symbol, &reference, params).0,
            })
            .collect();
        for (i, step) in moves.into_iter().enumerate() {
            cursors.advance(i, step);
        }
    }
    out.resize(length, Base::A);
    out
}

/// Candidate symbol explaining the most traces; ties go to the larger plurality count,
/// then to the candidate held by the earliest trace.
fn vs_ambiguous(cursors: &Cursors<'_>, counts: &[usize; 4], look: usize, params: &VsParams) -> Base {
    /// (traces explained, plurality count, earliest trace reversed)
    type Key = (usize, usize, std::cmp::Reverse<usize>);
    let n = cursors.traces.len();
    let mut best: Option<(Base, Key)> = None;
    for b in Base::ALL {
        if counts[b.index()] == 0 {
            continue;
        }
        let reference = cursors.lookahead(b, look);
        let explained = (0..n)
            .filter(|&i| match cursors.current(i) {
                Some(c) if c != b => {
                    vs_resync(&cursors.traces[i], cursors.pos[i], b, &reference, params).1
                }
                _ => false,
            })
            .count();
        let first = (0..n).find(|&i| cursors.current(i) == Some(b)).unwrap_or(n);
        let key = (
            counts[b.index()] + explained,
            counts[b.index()],
            std::cmp::Reverse(first),
        );
        if best.as_ref().is_none_or(|(_, k)| key > *k) {
            best = Some((b, key));
        }
    }
    best.map_or(Base::A, |(b, _)| b)
}
