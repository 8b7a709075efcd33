//! IDS channel: random ground truths, per-base corruption with an event log, and
//! cluster generation with reproducible per-cluster random streams.
//!
//! For every base `x[l]` the channel samples one event with probabilities
//! `(p_D, p_I, p_S, p_T)`:
//!
//! * deletion: emit nothing, move to `x[l + 1]`;
//! * insertion: emit a uniform base (it may equal `x[l]`), stay on `x[l]`;
//! * substitution: emit a uniform base different from `x[l]`, move on;
//! * transmission: emit `x[l]`, move on.
//!
//! Insertions are only ever drawn while processing a base, so nothing is appended
//! after the last base.

use std::fmt;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{Base, DnaSequence, Trace};

/// Per-event error probabilities. The transmission probability is always derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub insertion: f64,
    pub deletion: f64,
    pub substitution: f64,
}

impl ErrorRates {
    pub const NOISELESS: ErrorRates = ErrorRates::uniform(0.0);

    pub fn new(insertion: f64, deletion: f64, substitution: f64) -> Result<Self> {
        let rates = ErrorRates {
            insertion,
            deletion,
            substitution,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub const fn uniform(p: f64) -> Self {
        ErrorRates {
            insertion: p,
            deletion: p,
            substitution: p,
        }
    }

    /// `p_T = 1 - p_I - p_D - p_S`.
    pub fn transmission(&self) -> f64 {
        1.0 - self.insertion - self.deletion - self.substitution
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.insertion, self.deletion, self.substitution];
        if all.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParams(format!(
                "probabilities must be finite and non-negative, got {self}"
            )));
        }
        if all.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::InvalidParams(format!(
                "p_I + p_D + p_S must not exceed 1, got {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ErrorRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(p_I={}, p_D={}, p_S={})",
            self.insertion, self.deletion, self.substitution
        )
    }
}

/// Channel configuration: base rates plus optional per-position overrides.
///
/// `position_profile[l]` replaces the base rates while processing original position
/// `l`; positions past the end of the profile use the base rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub rates: ErrorRates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_profile: Option<Vec<ErrorRates>>,
}

impl ChannelParams {
    pub fn new(rates: ErrorRates) -> Result<Self> {
        rates.validate()?;
        Ok(ChannelParams {
            rates,
            position_profile: None,
        })
    }

    pub fn uniform(p: f64) -> Result<Self> {
        Self::new(ErrorRates::uniform(p))
    }

    pub fn noiseless() -> Self {
        ChannelParams {
            rates: ErrorRates::NOISELESS,
            position_profile: None,
        }
    }

    pub fn with_profile(mut self, profile: Vec<ErrorRates>) -> Result<Self> {
        for rates in &profile {
            rates.validate()?;
        }
        self.position_profile = Some(profile);
        Ok(self)
    }

    /// Base rates everywhere except the last `tail` positions of a length-`len`
    /// sequence, which use `tail_rates`.
    pub fn with_tail(self, len: usize, tail: usize, tail_rates: ErrorRates) -> Result<Self> {
        let base = self.rates;
        let profile = (0..len)
            .map(|l| if l + tail >= len { tail_rates } else { base })
            .collect();
        self.with_profile(profile)
    }

    #[inline]
    pub fn rates_at(&self, position: usize) -> &ErrorRates {
        self.position_profile
            .as_ref()
            .and_then(|p| p.get(position))
            .unwrap_or(&self.rates)
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if let Some(profile) = &self.position_profile {
            for rates in profile {
                rates.validate()?;
            }
        }
        Ok(())
    }
}

/// Uniform error-rate distribution `U(lower + 0.01k, upper + 0.01k)` for sweep level `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseDistribution {
    pub lower: f64,
    pub upper: f64,
    pub level: u32,
}

/// Shift applied per sweep level.
pub const SWEEP_STEP: f64 = 0.01;

impl NoiseDistribution {
    /// The training distribution `U(0.01, 0.10)` shifted to sweep level `k`.
    pub fn standard(level: u32) -> Self {
        NoiseDistribution {
            lower: 0.01,
            upper: 0.10,
            level,
        }
    }

    pub fn point(p: f64) -> Self {
        NoiseDistribution {
            lower: p,
            upper: p,
            level: 0,
        }
    }

    /// Effective interval after the sweep shift.
    pub fn interval(&self) -> (f64, f64) {
        let shift = SWEEP_STEP * self.level as f64;
        (self.lower + shift, self.upper + shift)
    }

    /// Mean of the shifted interval.
    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.interval();
        0.5 * (lo + hi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lower)
            || !(0.0..=1.0).contains(&self.upper)
            || self.lower > self.upper
        {
            return Err(Error::InvalidDistribution(format!(
                "need 0 <= lower <= upper <= 1, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        let (lo, hi) = self.interval();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "shifted interval [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        // three independent draws must always form valid channel parameters
        if 3.0 * hi > 1.0 + 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "shifted upper bound {hi} allows p_I + p_D + p_S > 1"
            )));
        }
        Ok(())
    }
}

/// Draws `p_I`, `p_D`, `p_S` independently from the shifted interval.
pub fn sample_params<R: Rng + ?Sized>(dist: &NoiseDistribution, rng: &mut R) -> Result<ChannelParams> {
    dist.validate()?;
    let (lo, hi) = dist.interval();
    let mut draw = || if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let insertion = draw();
    let deletion = draw();
    let substitution = draw();
    ChannelParams::new(ErrorRates {
        insertion,
        deletion,
        substitution,
    })
}

/// Uniform ground truth of length `len`.
pub fn sample_sequence<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<DnaSequence> {
    DnaSequence::random(len, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditKind {
    Match,
    Substitute(Base),
    Insert(Base),
    Delete,
}

impl EditKind {
    /// Match, substitution and deletion finish an original position.
    pub fn is_terminal(self) -> bool {
        !matches!(self, EditKind::Insert(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EditEvent {
    /// Original-sequence position the event was drawn at.
    pub position: usize,
    pub kind: EditKind,
}

/// Every event drawn while corrupting one sequence, in order.
///
/// The compact text form writes one code per event: `M` (match), `D` (deletion),
/// `S<base>` (substitution to base), `I<base>` (insertion of base), e.g. `MIAMSGD`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EditScript {
    pub events: Vec<EditEvent>,
}

impl EditScript {
    /// Applies the script to `x`, checking that it is well formed for `x`.
    pub fn replay(&self, x: &[Base]) -> Result<Trace> {
        let mut out = Vec::with_capacity(x.len() + 8);
        let mut position = 0;
        for event in &self.events {
            if event.position != position || position >= x.len() {
                return Err(Error::ReplayMismatch(format!(
                    "event at position {} while cursor is at {position} of {}",
                    event.position,
                    x.len()
                )));
            }
            match event.kind {
                EditKind::Match => out.push(x[position]),
                EditKind::Substitute(b) => {
                    if b == x[position] {
                        return Err(Error::ReplayMismatch(format!(
                            "substitution at {position} keeps base {b}"
                        )));
                    }
                    out.push(b)
                }
                EditKind::Insert(b) => out.push(b),
                EditKind::Delete => {}
            }
            if event.kind.is_terminal() {
                position += 1;
            }
        }
        if position != x.len() {
            return Err(Error::ReplayMismatch(format!(
                "script covers {position} of {} positions",
                x.len()
            )));
        }
        Ok(DnaSequence::new(out))
    }

    pub fn to_compact(&self) -> String {
        let mut s = String::with_capacity(self.events.len() + 8);
        for event in &self.events {
            match event.kind {
                EditKind::Match => s.push('M'),
                EditKind::Delete => s.push('D'),
                EditKind::Substitute(b) => {
                    s.push('S');
                    s.push(b.to_char());
                }
                EditKind::Insert(b) => {
                    s.push('I');
                    s.push(b.to_char());
                }
            }
        }
        s
    }

    pub fn parse_compact(s: &str) -> Result<Self> {
        let mut events = Vec::with_capacity(s.len());
        let mut position = 0;
        let mut chars = s.chars();
        while let Some(c) = chars.next() {
            let mut base = || -> Result<Base> {
                let b = chars
                    .next()
                    .ok_or_else(|| Error::MalformedEditScript(format!("{c} without a base")))?;
                Base::from_char(b).map_err(|_| Error::MalformedEditScript(format!("bad base {b:?}")))
            };
            let kind = match c {
                'M' => EditKind::Match,
                'D' => EditKind::Delete,
                'S' => EditKind::Substitute(base()?),
                'I' => EditKind::Insert(base()?),
                other => {
                    return Err(Error::MalformedEditScript(format!("unknown op {other:?}")));
                }
            };
            events.push(EditEvent { position, kind });
            if kind.is_terminal() {
                position += 1;
            }
        }
        Ok(EditScript { events })
    }

    pub fn count(&self, pred: impl Fn(EditKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(e.kind)).count()
    }
}

/// Passes `x` through the IDS channel once.
pub fn corrupt<R: Rng + ?Sized>(
    x: &[Base],
    params: &ChannelParams,
    rng: &mut R,
) -> (Trace, EditScript) {
    let mut trace = Vec::with_capacity(x.len() + x.len() / 8 + 4);
    let mut events = Vec::with_capacity(x.len() + x.len() / 8 + 4);
    for (position, &base) in x.iter().enumerate() {
        let rates = params.rates_at(position);
        let del = rates.deletion;
        let ins = del + rates.insertion;
        let sub = ins + rates.substitution;
        loop {
            let u: f64 = rng.gen();
            let kind = if u < del {
                EditKind::Delete
            } else if u < ins {
                EditKind::Insert(Base::random(rng))
            } else if u < sub {
                EditKind::Substitute(base.random_other(rng))
            } else {
                EditKind::Match
            };
            match kind {
                EditKind::Match => trace.push(base),
                EditKind::Substitute(b) | EditKind::Insert(b) => trace.push(b),
                EditKind::Delete => {}
            }
            events.push(EditEvent { position, kind });
            if kind.is_terminal() {
                break;
            }
        }
    }
    (DnaSequence::new(trace), EditScript { events })
}

/// Number of traces per cluster: fixed, or uniform over an inclusive range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClusterSize {
    Fixed(usize),
    Range(RangeInclusive<usize>),
}

impl ClusterSize {
    pub fn max(&self) -> usize {
        match self {
            ClusterSize::Fixed(n) => *n,
            ClusterSize::Range(r) => *r.end(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        match self {
            ClusterSize::Fixed(n) => Ok(*n),
            ClusterSize::Range(r) if r.is_empty() => Err(Error::InvalidConfig(format!(
                "empty cluster size range {}..={}",
                r.start(),
                r.end()
            ))),
            ClusterSize::Range(r) => Ok(rng.gen_range(r.clone())),
        }
    }
}

impl std::str::FromStr for ClusterSize {
    type Err = Error;

    /// Accepts `"5"`, `"2..10"` or `"2..=10"` (both range forms are inclusive).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad cluster size {s:?}"));
        if let Some((lo, hi)) = s.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            Ok(ClusterSize::Range(lo..=hi))
        } else {
            Ok(ClusterSize::Fixed(s.trim().parse().map_err(|_| bad())?))
        }
    }
}

impl fmt::Display for ClusterSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterSize::Fixed(n) => write!(f, "{n}"),
            ClusterSize::Range(r) => write!(f, "{}..{}", r.start(), r.end()),
        }
    }
}

/// One ground truth and its noisy traces.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub ground_truth: DnaSequence,
    pub traces: Vec<Trace>,
    /// One script per trace when the cluster was simulated.
    pub edits: Option<Vec<EditScript>>,
    pub params: ChannelParams,
    pub seed: u64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Checks that every stored edit script replays to its trace.
    pub fn check_replay(&self) -> Result<()> {
        if let Some(edits) = &self.edits {
            if edits.len() != self.traces.len() {
                return Err(Error::ReplayMismatch(format!(
                    "{} scripts for {} traces",
                    edits.len(),
                    self.traces.len()
                )));
            }
            for (i, (trace, script)) in self.traces.iter().zip(edits).enumerate() {
                if &script.replay(&self.ground_truth)? != trace {
                    return Err(Error::ReplayMismatch(format!("trace {i}")));
                }
            }
        }
        Ok(())
    }
}

/// Simulates one cluster: one parameter draw shared by all traces, then the cluster
/// size, then independent traces.
pub fn generate_cluster<R: Rng + ?Sized>(
    len: usize,
    size: &ClusterSize,
    dist: &NoiseDistribution,
    rng: &mut R,
) -> Result<Cluster> {
    let ground_truth = sample_sequence(len, rng)?;
    let params = sample_params(dist, rng)?;
    let n = size.sample(rng)?;
    let (traces, edits) = (0..n).map(|_| corrupt(&ground_truth, &params, rng)).unzip();
    Ok(Cluster {
        ground_truth,
        traces,
        edits: Some(edits),
        params,
        seed: 0,
    })
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`. Streams are independent of worker count.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dataset synthesis settings.
#[derive(Clone, Debug)]
pub struct GenerateConfig {
    pub length: usize,
    pub size: ClusterSize,
    pub noise: NoiseDistribution,
    /// Token budget per training instance; clusters whose instance would not fit are
    /// redrawn from the continuing stream.
    pub context_length: Option<usize>,
}

impl GenerateConfig {
    pub fn new(length: usize, size: ClusterSize, noise: NoiseDistribution) -> Self {
        GenerateConfig {
            length,
            size,
            noise,
            context_length: None,
        }
    }
}

const MAX_REDRAWS: usize = 1000;

/// Cluster number `index` of the dataset with master seed `master`. Its `seed` field is
/// the derived stream seed, so the cluster can be regenerated on its own.
pub fn generate_indexed(cfg: &GenerateConfig, master: u64, index: u64) -> Result<Cluster> {
    let seed = derive_seed(master, index);
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_REDRAWS {
        let mut cluster = generate_cluster(cfg.length, &cfg.size, &cfg.noise, &mut rng)?;
        cluster.seed = seed;
        match cfg.context_length {
            Some(limit) if crate::dataset::instance_token_count(&cluster) > limit => continue,
            _ => return Ok(cluster),
        }
    }
    Err(Error::InvalidConfig(format!(
        "no cluster fits the context length after {MAX_REDRAWS} draws"
    )))
}
