//! Edit distance, failure rate and grouped evaluation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::algorithms::Algorithm;
use crate::channel::{Cluster, ErrorRates};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seq::DnaSequence;

/// Unit-cost edit distance (insertions, deletions, substitutions).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(diag + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

/// Edit distance if it is at most `max`, computed on the diagonal band of half-width
/// `max` (every alignment of cost `<= max` stays inside it).
pub fn levenshtein_within<T: PartialEq>(a: &[T], b: &[T], max: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > max {
        return None;
    }
    const INF: usize = usize::MAX / 2;
    let mut prev = vec![INF; m + 1];
    let mut cur = vec![INF; m + 1];
    for (j, p) in prev.iter_mut().enumerate().take(max.min(m) + 1) {
        *p = j;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(max);
        let hi = (i + max).min(m);
        if lo > 0 {
            cur[lo - 1] = INF;
        }
        for j in lo..=hi {
            let v = if j == 0 {
                i
            } else {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                sub.min(prev[j] + 1).min(cur[j - 1] + 1)
            };
            cur[j] = v;
        }
        if hi < m {
            cur[hi + 1] = INF;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= max).then_some(d)
}

/// `levenshtein(x, estimate) / |x|`.
pub fn normalized_distance(x: &DnaSequence, estimate: &DnaSequence) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(levenshtein(x, estimate) as f64 / x.len() as f64)
}

/// Which keys split the report into rows. Rows are always split by ground-truth length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Grouping {
    pub by_cluster_size: bool,
}

impl Grouping {
    pub const ALL: Grouping = Grouping {
        by_cluster_size: false,
    };
    pub const BY_N: Grouping = Grouping {
        by_cluster_size: true,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub algorithm: String,
    #[serde(rename = "L")]
    pub length: usize,
    /// `None` when rows are not split by cluster size.
    #[serde(rename = "N")]
    pub traces: Option<usize>,
    #[serde(rename = "k")]
    pub level: u32,
    #[serde(rename = "mean_dL")]
    pub mean_dl: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single instance.
    #[serde(rename = "std_dL")]
    pub std_dl: f64,
    pub failure_rate: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const CSV_HEADER: &str = "algorithm,L,N,k,mean_dL,std_dL,failure_rate,count";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows serialize")
    }

    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }
}

impl EvalRow {
    pub fn csv_line(&self) -> String {
        let mut s = String::new();
        let n = self.traces.map_or_else(|| "all".to_string(), |n| n.to_string());
        write!(
            s,
            "{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.length,
            n,
            self.level,
            self.mean_dl,
            self.std_dl,
            self.failure_rate,
            self.count
        )
        .unwrap();
        s
    }
}

#[derive(Default)]
struct Accumulator {
    distances: Vec<f64>,
    failures: usize,
}

/// Scores `estimates[i]` against `clusters[i].ground_truth`. Estimates are scored as-is
/// (no truncation or padding).
pub fn score(
    algorithm: &str,
    clusters: &[Cluster],
    estimates: &[DnaSequence],
    grouping: Grouping,
    level: u32,
) -> Result<EvalReport> {
    if clusters.len() != estimates.len() {
        return Err(Error::CountMismatch {
            expected: clusters.len(),
            found: estimates.len(),
        });
    }
    let mut groups: BTreeMap<(usize, Option<usize>), Accumulator> = BTreeMap::new();
    for (cluster, estimate) in clusters.iter().zip(estimates) {
        let x = &cluster.ground_truth;
        let d = levenshtein(x, estimate);
        let dl = normalized_distance(x, estimate)?;
        let key = (x.len(), grouping.by_cluster_size.then_some(cluster.len()));
        let acc = groups.entry(key).or_default();
        acc.distances.push(dl);
        acc.failures += usize::from(d > 0);
    }
    let rows = groups
        .into_iter()
        .map(|((length, traces), acc)| {
            let count = acc.distances.len();
            let mean = acc.distances.iter().sum::<f64>() / count as f64;
            let std = if count > 1 {
                let ss: f64 = acc.distances.iter().map(|d| (d - mean).powi(2)).sum();
                (ss / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            EvalRow {
                algorithm: algorithm.to_string(),
                length,
                traces,
                level,
                mean_dl: mean,
                std_dl: std,
                failure_rate: acc.failures as f64 / count as f64,
                count,
            }
        })
        .collect();
    Ok(EvalReport { rows })
}

/// Runs `algorithm` on every cluster and scores the result. A cluster on which the
/// algorithm fails is scored with an empty estimate.
pub fn evaluate(
    algorithm: &Algorithm,
    clusters: &[Cluster],
    hint: &ErrorRates,
    grouping: Grouping,
    level: u32,
    exec: Execution,
) -> Result<EvalReport> {
    let estimates = reconstruct_all(algorithm, clusters, hint, exec);
    score(algorithm.name(), clusters, &estimates, grouping, level)
}

/// One estimate per cluster, in order; failures become empty estimates.
pub fn reconstruct_all(
    algorithm: &Algorithm,
    clusters: &[Cluster],
    hint: &ErrorRates,
    exec: Execution,
) -> Vec<DnaSequence> {
    exec.map(clusters, |c| {
        algorithm
            .reconstruct(c, c.ground_truth.len(), hint)
            .map(|r| r.estimate)
            .unwrap_or_default()
    })
}
