//! Tokenized training instances and real-data preprocessing.
//!
//! A prompt is the traces joined by `|` and closed by `:`; the candidate-prediction
//! target is the ground truth itself, the alignment target is the ground-truth MSA rows
//! joined by `|` and closed by `#`.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::align::Alignment;
use crate::channel::{ChannelParams, Cluster, ErrorRates};
use crate::error::{Error, Result};
use crate::metrics::levenshtein_within;
use crate::seq::{Base, DnaSequence, Trace};

pub const SEPARATOR: char = '|';
pub const PROMPT_END: char = ':';
pub const PAD: char = '#';
pub const GAP: char = '-';

/// Fixed token table. Ids are part of the exported dataset contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    with_gap: bool,
}

const TOKENS: [char; 8] = ['A', 'C', 'G', 'T', SEPARATOR, PROMPT_END, PAD, GAP];

impl Vocabulary {
    /// `{A, C, G, T, |, :, #}`.
    pub const BASIC: Vocabulary = Vocabulary { with_gap: false };
    /// Adds the gap token `-` for alignment targets.
    pub const MSA: Vocabulary = Vocabulary { with_gap: true };

    pub fn size(&self) -> usize {
        if self.with_gap {
            8
        } else {
            7
        }
    }

    pub fn tokens(&self) -> &'static [char] {
        &TOKENS[..self.size()]
    }

    pub fn id(&self, c: char) -> Option<u8> {
        self.tokens().iter().position(|&t| t == c).map(|i| i as u8)
    }

    pub fn token(&self, id: u8) -> Option<char> {
        self.tokens().get(id as usize).copied()
    }

    pub fn encode(&self, s: &str) -> Result<Vec<u8>> {
        s.chars()
            .map(|c| self.id(c).ok_or(Error::InvalidToken(c)))
            .collect()
    }

    pub fn decode(&self, ids: &[u8]) -> Result<String> {
        ids.iter()
            .map(|&i| self.token(i).ok_or(Error::InvalidToken(char::from(i))))
            .collect()
    }

    /// Dataset header line, e.g. `#vocab=ACGT|:#-`.
    pub fn header(&self) -> String {
        let mut s = String::from("#vocab=");
        s.extend(self.tokens());
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMeta {
    pub length: usize,
    pub traces: usize,
    pub rates: ErrorRates,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingInstance {
    pub prompt: Vec<u8>,
    pub target: Vec<u8>,
    pub meta: InstanceMeta,
}

impl TrainingInstance {
    pub fn token_count(&self) -> usize {
        self.prompt.len() + self.target.len()
    }

    /// `<prompt><target>` as text.
    pub fn to_text(&self) -> String {
        let vocab = Vocabulary::MSA;
        let mut s = vocab.decode(&self.prompt).expect("valid ids");
        s.push_str(&vocab.decode(&self.target).expect("valid ids"));
        s
    }

    /// Text left-padded with `#` to exactly `width` characters.
    pub fn to_padded_text(&self, width: usize) -> Result<String> {
        let n = self.token_count();
        if n > width {
            return Err(Error::ContextOverflow {
                needed: n,
                limit: width,
            });
        }
        let mut s: String = std::iter::repeat_n(PAD, width - n).collect();
        s.push_str(&self.to_text());
        Ok(s)
    }
}

fn base_id(b: Base) -> u8 {
    b.index() as u8
}

/// `y_1 | y_2 | ... | y_N :` as token ids.
pub fn encode_prompt(traces: &[Trace]) -> Result<Vec<u8>> {
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let sep = Vocabulary::BASIC.id(SEPARATOR).unwrap();
    let end = Vocabulary::BASIC.id(PROMPT_END).unwrap();
    let mut out = Vec::with_capacity(traces.iter().map(|t| t.len() + 1).sum());
    for (i, trace) in traces.iter().enumerate() {
        if i > 0 {
            out.push(sep);
        }
        out.extend(trace.iter().map(|&b| base_id(b)));
    }
    out.push(end);
    Ok(out)
}

pub fn prompt_text(traces: &[Trace]) -> Result<String> {
    Vocabulary::BASIC.decode(&encode_prompt(traces)?)
}

/// Tokens in the candidate-prediction instance of `cluster`.
pub fn instance_token_count(cluster: &Cluster) -> usize {
    let traces: usize = cluster.traces.iter().map(|t| t.len()).sum();
    traces + cluster.traces.len().max(1) + cluster.ground_truth.len()
}

/// Default context window: `N_max * (ceil(1.25 L) + 1) + L + 2`.
pub fn default_context_length(length: usize, max_traces: usize) -> usize {
    let per_trace = (5 * length).div_ceil(4) + 1;
    max_traces * per_trace + length + 2
}

fn meta(cluster: &Cluster) -> InstanceMeta {
    InstanceMeta {
        length: cluster.ground_truth.len(),
        traces: cluster.traces.len(),
        rates: cluster.params.rates,
        seed: cluster.seed,
    }
}

/// Prompt followed by the ground truth.
pub fn encode_training_instance(
    cluster: &Cluster,
    context_length: Option<usize>,
) -> Result<TrainingInstance> {
    if cluster.ground_truth.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let prompt = encode_prompt(&cluster.traces)?;
    let target: Vec<u8> = cluster.ground_truth.iter().map(|&b| base_id(b)).collect();
    let instance = TrainingInstance {
        prompt,
        target,
        meta: meta(cluster),
    };
    check_context(&instance, context_length)?;
    Ok(instance)
}

fn check_context(instance: &TrainingInstance, limit: Option<usize>) -> Result<()> {
    match limit {
        Some(limit) if instance.token_count() > limit => Err(Error::ContextOverflow {
            needed: instance.token_count(),
            limit,
        }),
        _ => Ok(()),
    }
}

/// Prompt followed by the alignment rows joined with `|` and terminated by `#`.
pub fn encode_msa_instance(
    cluster: &Cluster,
    alignment: &Alignment,
    context_length: Option<usize>,
) -> Result<TrainingInstance> {
    let traces = &cluster.traces;
    if alignment.rows().len() != traces.len() {
        return Err(Error::AlignmentMismatch(format!(
            "{} rows for {} traces",
            alignment.rows().len(),
            traces.len()
        )));
    }
    alignment.validate()?;
    for (i, trace) in traces.iter().enumerate() {
        if alignment.degapped(i) != *trace {
            return Err(Error::AlignmentMismatch(format!("row {i} does not de-gap to its trace")));
        }
    }
    let prompt = encode_prompt(traces)?;
    let target = Vocabulary::MSA.encode(&format!("{}{PAD}", alignment.to_text()))?;
    let instance = TrainingInstance {
        prompt,
        target,
        meta: meta(cluster),
    };
    check_context(&instance, context_length)?;
    Ok(instance)
}

/// Splits a text line `<prompt><target>` back into traces and target, skipping any left
/// padding.
pub fn parse_instance_line(line: &str) -> Result<(Vec<Trace>, String)> {
    let body = line.trim_start_matches(PAD);
    let (prompt, target) = body.split_once(PROMPT_END).ok_or(Error::Parse {
        line: 0,
        message: "missing ':'".into(),
    })?;
    let traces = prompt
        .split(SEPARATOR)
        .map(|t| t.parse())
        .collect::<Result<Vec<Trace>>>()?;
    Ok((traces, target.to_string()))
}

/// Repeatedly draws a size uniformly from `[min, max]` and takes that many traces
/// without replacement until fewer than `min` remain. A draw larger than the remainder
/// takes the whole remainder. Leftovers are discarded; each part keeps the parent's
/// ground truth and metadata.
pub fn subcluster_split<R: Rng + ?Sized>(
    cluster: &Cluster,
    min: usize,
    max: usize,
    rng: &mut R,
) -> Result<Vec<Cluster>> {
    if min == 0 || min > max {
        return Err(Error::InvalidConfig(format!("bad subcluster bounds [{min}, {max}]")));
    }
    let mut order: Vec<usize> = (0..cluster.traces.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::new();
    let mut rest = order.as_slice();
    while rest.len() >= min {
        let size = rng.gen_range(min..=max).min(rest.len());
        let (take, tail) = rest.split_at(size);
        rest = tail;
        out.push(Cluster {
            ground_truth: cluster.ground_truth.clone(),
            traces: take.iter().map(|&i| cluster.traces[i].clone()).collect(),
            edits: cluster
                .edits
                .as_ref()
                .map(|e| take.iter().map(|&i| e[i].clone()).collect()),
            params: cluster.params.clone(),
            seed: cluster.seed,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct LeakageReport {
    pub traces_in: usize,
    pub traces_removed: usize,
    pub clusters_in: usize,
    pub clusters_dropped: usize,
}

/// Removes every training trace whose edit distance to any test ground truth lies in
/// `[d_min, d_max]`, then drops clusters left with fewer than two traces.
pub fn leakage_filter(
    train: &[Cluster],
    test_ground_truths: &[DnaSequence],
    d_min: usize,
    d_max: usize,
) -> (Vec<Cluster>, LeakageReport) {
    let mut report = LeakageReport {
        clusters_in: train.len(),
        ..Default::default()
    };
    let leaks = |trace: &Trace| {
        test_ground_truths.iter().any(|gt| {
            levenshtein_within(trace, gt, d_max).is_some_and(|d| d >= d_min)
        })
    };
    let mut kept = Vec::with_capacity(train.len());
    for cluster in train {
        report.traces_in += cluster.traces.len();
        let keep: Vec<usize> = (0..cluster.traces.len())
            .filter(|&i| !leaks(&cluster.traces[i]))
            .collect();
        report.traces_removed += cluster.traces.len() - keep.len();
        if keep.len() < 2 {
            report.clusters_dropped += 1;
            continue;
        }
        kept.push(Cluster {
            ground_truth: cluster.ground_truth.clone(),
            traces: keep.iter().map(|&i| cluster.traces[i].clone()).collect(),
            edits: cluster
                .edits
                .as_ref()
                .map(|e| keep.iter().map(|&i| e[i].clone()).collect()),
            params: cluster.params.clone(),
            seed: cluster.seed,
        });
    }
    (kept, report)
}

/// Drops the longest all-`C` suffix.
pub fn strip_trailing_c(trace: &Trace) -> Trace {
    let end = trace
        .iter()
        .rposition(|&b| b != Base::C)
        .map_or(0, |i| i + 1);
    DnaSequence::new(trace[..end].to_vec())
}

/// How the index field is cut out of a raw read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexRule {
    /// The first `n` characters are the index, the rest is the trace.
    Prefix(usize),
    /// Index and trace are separated by the first occurrence of the delimiter.
    Delimiter(char),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct IndexReport {
    pub records: usize,
    /// Index field missing or too short.
    pub malformed: usize,
    /// Index not in the allowed set.
    pub unknown_index: usize,
    /// Trace contains symbols outside {A, C, G, T}.
    pub invalid_trace: usize,
    pub clusters: usize,
}

/// Groups raw reads by exact index. With `allowed` set, reads carrying any other index
/// count as index errors and are discarded.
pub fn cluster_by_index<'a>(
    records: impl IntoIterator<Item = &'a str>,
    rule: &IndexRule,
    allowed: Option<&HashSet<String>>,
) -> (BTreeMap<String, Vec<Trace>>, IndexReport) {
    let mut report = IndexReport::default();
    let mut groups: BTreeMap<String, Vec<Trace>> = BTreeMap::new();
    for record in records {
        report.records += 1;
        let record = record.trim();
        let split = match rule {
            IndexRule::Prefix(n) => {
                if record.len() >= *n && record.is_char_boundary(*n) && *n > 0 {
                    Some(record.split_at(*n))
                } else {
                    None
                }
            }
            IndexRule::Delimiter(d) => record
                .split_once(*d)
                .filter(|(idx, _)| !idx.is_empty()),
        };
        let Some((index, trace)) = split else {
            report.malformed += 1;
            continue;
        };
        if allowed.is_some_and(|set| !set.contains(index)) {
            report.unknown_index += 1;
            continue;
        }
        match trace.trim().parse::<Trace>() {
            Ok(t) => groups.entry(index.to_string()).or_default().push(t),
            Err(_) => report.invalid_trace += 1,
        }
    }
    report.clusters = groups.len();
    (groups, report)
}

/// Builds clusters from index groups, attaching ground truths where known. Unknown
/// ground truths stay empty.
pub fn clusters_from_groups(
    groups: BTreeMap<String, Vec<Trace>>,
    references: &BTreeMap<String, DnaSequence>,
) -> Vec<Cluster> {
    groups
        .into_iter()
        .map(|(index, traces)| Cluster {
            ground_truth: references.get(&index).cloned().unwrap_or_default(),
            traces,
            edits: None,
            params: ChannelParams::noiseless(),
            seed: 0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{rng_from_seed, ClusterSize, NoiseDistribution};
    use crate::seq::dna;

    fn cluster_of(x: &str, traces: &[&str]) -> Cluster {
        Cluster {
            ground_truth: dna(x),
            traces: traces.iter().map(|t| dna(t)).collect(),
            edits: None,
            params: ChannelParams::noiseless(),
            seed: 0,
        }
    }

    #[test]
    fn vocabulary_ids_are_fixed() {
        let v = Vocabulary::MSA;
        for (i, c) in "ACGT|:#-".chars().enumerate() {
            assert_eq!(v.id(c), Some(i as u8));
        }
        assert_eq!(Vocabulary::BASIC.id('-'), None);
        assert_eq!(Vocabulary::BASIC.header(), "#vocab=ACGT|:#");
        assert_eq!(v.header(), "#vocab=ACGT|:#-");
    }

    #[test]
    fn prompt_examples() {
        let p = prompt_text(&[dna("ACTTTGAT"), dna("ATTTAT")]).unwrap();
        assert_eq!(p, "ACTTTGAT|ATTTAT:");
        assert_eq!(prompt_text(&[dna("ACGT")]).unwrap(), "ACGT:");
        assert_eq!(prompt_text(&[dna("AA"), dna("AA"), dna("AA")]).unwrap(), "AA|AA|AA:");
        assert!(matches!(encode_prompt(&[]), Err(Error::EmptyTraceSet)));
    }

    #[test]
    fn training_instance_from_three_traces() {
        let c = cluster_of("ACTTGAT", &["ACTTTGAT", "ATTTAT"]);
        let inst = encode_training_instance(&c, None).unwrap();
        assert_eq!(inst.to_text(), "ACTTTGAT|ATTTAT:ACTTGAT");
        assert_eq!(inst.meta.traces, 2);
    }

    #[test]
    fn training_instance_overflow() {
        let c = cluster_of("ACGTACGTAC", &["ACGTACGTACGTAC", "ACGTACGTACGTAC"]);
        // 14 + 1 + 14 + 1 + 10 = 40 tokens
        assert_eq!(instance_token_count(&c), 40);
        let err = encode_training_instance(&c, Some(32)).unwrap_err();
        assert!(matches!(err, Error::ContextOverflow { needed: 40, limit: 32 }));
        assert!(encode_training_instance(&c, Some(40)).is_ok());
    }

    #[test]
    fn padded_text_is_left_padded() {
        let c = cluster_of("AC", &["AC"]);
        let inst = encode_training_instance(&c, None).unwrap();
        assert_eq!(inst.to_padded_text(8).unwrap(), "###AC:AC");
        assert!(inst.to_padded_text(4).is_err());
        let (traces, target) = parse_instance_line("###AC:AC").unwrap();
        assert_eq!(traces, vec![dna("AC")]);
        assert_eq!(target, "AC");
    }

    #[test]
    fn default_context_formula() {
        // 10 * (ceil(137.5) + 1) + 110 + 2
        assert_eq!(default_context_length(110, 10), 10 * 139 + 112);
        assert_eq!(default_context_length(8, 2), 2 * 11 + 10);
    }

    #[test]
    fn strip_c_examples() {
        assert_eq!(strip_trailing_c(&dna("ACGTCCC")), dna("ACGT"));
        assert_eq!(strip_trailing_c(&dna("CCCC")), dna(""));
        assert_eq!(strip_trailing_c(&dna("ACG")), dna("ACG"));
        assert_eq!(strip_trailing_c(&dna("")), dna(""));
    }

    #[test]
    fn subcluster_small_inputs() {
        let mut rng = rng_from_seed(1);
        let c = cluster_of("ACGT", &["ACGT"]);
        assert!(subcluster_split(&c, 2, 10, &mut rng).unwrap().is_empty());
        assert!(subcluster_split(&c, 3, 2, &mut rng).is_err());
    }

    #[test]
    fn subcluster_of_25() {
        let mut rng = rng_from_seed(8);
        let cfg = crate::channel::GenerateConfig::new(30, ClusterSize::Fixed(25), NoiseDistribution::standard(0));
        let c = crate::channel::generate_indexed(&cfg, 1, 0).unwrap();
        let parts = subcluster_split(&c, 2, 10, &mut rng).unwrap();
        let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
        assert!(sizes.iter().all(|&s| (2..=10).contains(&s)));
        assert!(sizes.iter().sum::<usize>() >= 24 - 9);
        for p in &parts {
            p.check_replay().unwrap();
            assert_eq!(p.ground_truth, c.ground_truth);
        }
        let again = subcluster_split(&c, 2, 10, &mut rng_from_seed(8)).unwrap();
        assert_eq!(parts, again);
    }

    #[test]
    fn leakage_boundaries() {
        let test = dna("AAAAAAAAAAAAAAAAAAAA");
        let at = |d: usize| {
            let mut s = "C".repeat(d);
            s.push_str(&"A".repeat(20 - d));
            dna(&s)
        };
        let train = vec![
            Cluster {
                ground_truth: dna("A"),
                traces: vec![at(7), at(4), at(14), at(0), at(5), at(13)],
                edits: None,
                params: ChannelParams::noiseless(),
                seed: 0,
            },
        ];
        let (kept, report) = leakage_filter(&train, std::slice::from_ref(&test), 5, 13);
        assert_eq!(report.traces_removed, 3);
        assert_eq!(kept[0].traces, vec![at(4), at(14), at(0)]);
        let (again, report2) = leakage_filter(&kept, &[test], 5, 13);
        assert_eq!(again, kept);
        assert_eq!(report2.traces_removed, 0);
    }

    #[test]
    fn leakage_drops_small_clusters() {
        let test = dna("AAAAAAAAAA");
        let far = "C".repeat(20);
        let train = vec![cluster_of("A", &["AAAAACCCCC", &far])];
        let (kept, report) = leakage_filter(&train, &[test], 5, 13);
        assert!(kept.is_empty());
        assert_eq!(report.clusters_dropped, 1);
        assert_eq!(report.traces_removed, 1);
    }

    #[test]
    fn index_clustering() {
        let records = ["0003ACGT", "0003ACGA", "0001TTTT", "00", "0009ACXG"];
        let (groups, report) = cluster_by_index(records, &IndexRule::Prefix(4), None);
        assert_eq!(groups["0003"], vec![dna("ACGT"), dna("ACGA")]);
        assert_eq!(groups.len(), 2);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.invalid_trace, 1);

        let allowed: HashSet<String> = ["a".to_string()].into();
        let (groups, report) = cluster_by_index(
            ["a\tACGT", "b\tACGT", "noindex"],
            &IndexRule::Delimiter('\t'),
            Some(&allowed),
        );
        assert_eq!(groups.len(), 1);
        assert_eq!(report.unknown_index, 1);
        assert_eq!(report.malformed, 1);

        let (groups, report) = cluster_by_index(std::iter::empty(), &IndexRule::Prefix(4), None);
        assert!(groups.is_empty());
        assert_eq!(report, IndexReport::default());
    }
}
