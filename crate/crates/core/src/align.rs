//! Multiple sequence alignments and column-wise majority voting.
//!
//! Two ways to obtain an alignment: [`ground_truth_alignment`] replays simulated edit
//! scripts (columns anchored on original positions), [`center_star_msa`] aligns observed
//! traces heuristically around the most central trace.

use std::fmt;
use std::str::FromStr;

use crate::channel::{Cluster, EditKind};
use crate::dataset::{GAP, SEPARATOR};
use crate::error::{Error, Result};
use crate::metrics::levenshtein;
use crate::seq::{Base, DnaSequence, Trace};

/// `None` is a gap.
pub type Cell = Option<Base>;

/// Rows of equal length over {A, C, G, T, -}.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alignment {
    rows: Vec<Vec<Cell>>,
}

impl Alignment {
    pub fn new(rows: Vec<Vec<Cell>>) -> Result<Self> {
        let a = Alignment { rows };
        a.validate()?;
        Ok(a)
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    /// Number of columns.
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Equal row lengths and no all-gap column.
    pub fn validate(&self) -> Result<()> {
        let width = self.width();
        if let Some(i) = self.rows.iter().position(|r| r.len() != width) {
            return Err(Error::AlignmentMismatch(format!(
                "row {i} has length {} instead of {width}",
                self.rows[i].len()
            )));
        }
        if let Some(col) = (0..width).find(|&j| self.rows.iter().all(|r| r[j].is_none())) {
            return Err(Error::AlignmentMismatch(format!("column {col} is all gaps")));
        }
        Ok(())
    }

    /// Row `i` with gaps removed.
    pub fn degapped(&self, i: usize) -> Trace {
        self.rows[i].iter().flatten().copied().collect()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Cell> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Rows joined by `|`, e.g. `AC-T|ACGT`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * (self.width() + 1));
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                s.push(SEPARATOR);
            }
            s.extend(row.iter().map(|c| c.map_or(GAP, Base::to_char)));
        }
        s
    }
}

impl FromStr for Alignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(Alignment::default());
        }
        let rows = s
            .split(SEPARATOR)
            .map(|row| {
                row.chars()
                    .map(|c| if c == GAP { Ok(None) } else { Base::from_char(c).map(Some) })
                    .collect::<Result<Vec<Cell>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Alignment::new(rows)
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Alignment implied by the simulation log. For each original position the block is
/// the inserted columns (as many as the most-inserting trace, left-justified) followed by
/// the position's own column; deletions leave a gap there. Position columns deleted by
/// every trace are dropped.
pub fn ground_truth_alignment(cluster: &Cluster) -> Result<Alignment> {
    let edits = cluster.edits.as_ref().ok_or(Error::MissingEditScripts)?;
    if edits.len() != cluster.traces.len() {
        return Err(Error::MissingEditScripts);
    }
    let len = cluster.ground_truth.len();
    // per trace and position: inserted bases, then the terminal cell
    let mut per_trace: Vec<Vec<(Vec<Base>, Cell)>> = Vec::with_capacity(edits.len());
    for (i, script) in edits.iter().enumerate() {
        let mut blocks = vec![(Vec::new(), None); len];
        let mut position = 0;
        for event in &script.events {
            if event.position != position || position >= len {
                return Err(Error::ReplayMismatch(format!("trace {i}")));
            }
            match event.kind {
                EditKind::Insert(b) => blocks[position].0.push(b),
                EditKind::Match => blocks[position].1 = Some(cluster.ground_truth[position]),
                EditKind::Substitute(b) => blocks[position].1 = Some(b),
                EditKind::Delete => blocks[position].1 = None,
            }
            if event.kind.is_terminal() {
                position += 1;
            }
        }
        if position != len {
            return Err(Error::ReplayMismatch(format!("trace {i} script is incomplete")));
        }
        per_trace.push(blocks);
    }
    let mut rows: Vec<Vec<Cell>> = vec![Vec::new(); per_trace.len()];
    for l in 0..len {
        let slots = per_trace.iter().map(|b| b[l].0.len()).max().unwrap_or(0);
        for s in 0..slots {
            for (row, blocks) in rows.iter_mut().zip(&per_trace) {
                row.push(blocks[l].0.get(s).copied());
            }
        }
        if per_trace.iter().any(|b| b[l].1.is_some()) {
            for (row, blocks) in rows.iter_mut().zip(&per_trace) {
                row.push(blocks[l].1);
            }
        }
    }
    Ok(Alignment { rows })
}

/// One step of a pairwise alignment of `a` against `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignOp {
    /// `a[i]` aligned with `b[j]` (match or mismatch).
    Pair(usize, usize),
    /// `a[i]` against a gap.
    OnlyA(usize),
    /// `b[j]` against a gap.
    OnlyB(usize),
}

/// Optimal unit-cost global alignment (match 0, mismatch 1, gap 1). On ties the
/// traceback prefers the diagonal, then a gap in `b`, then a gap in `a`.
pub fn pairwise_align(a: &[Base], b: &[Base]) -> Vec<AlignOp> {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * w];
    for (j, cell) in dp[..w].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for i in 1..=n {
        dp[i * w] = i as u32;
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + u32::from(a[i - 1] != b[j - 1]);
            let up = dp[(i - 1) * w + j] + 1;
            let left = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(up).min(left);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m) + 4);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 && here == dp[(i - 1) * w + j - 1] + u32::from(a[i - 1] != b[j - 1]) {
            ops.push(AlignOp::Pair(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if i > 0 && here == dp[(i - 1) * w + j] + 1 {
            ops.push(AlignOp::OnlyA(i - 1));
            i -= 1;
        } else {
            ops.push(AlignOp::OnlyB(j - 1));
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Index of the trace with the smallest summed edit distance to all others (lowest index
/// on ties).
pub fn center_index(traces: &[Trace]) -> Option<usize> {
    let n = traces.len();
    let mut totals = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = levenshtein(&traces[i], &traces[j]);
            totals[i] += d;
            totals[j] += d;
        }
    }
    (0..n).min_by_key(|&i| (totals[i], i))
}

/// Center-star multiple alignment: every trace is aligned optimally to the center and the
/// pairwise alignments are merged keeping all gaps introduced into the center.
pub fn center_star_msa(traces: &[Trace]) -> Alignment {
    let Some(center_idx) = center_index(traces) else {
        return Alignment::default();
    };
    let center = &traces[center_idx];
    let c = center.len();
    // per trace: bases inserted before center position p (p == c: after the end),
    // and the cell aligned to each center position
    struct Star {
        inserted: Vec<Vec<Base>>,
        aligned: Vec<Cell>,
    }
    let stars: Vec<Star> = traces
        .iter()
        .enumerate()
        .map(|(t, trace)| {
            let mut star = Star {
                inserted: vec![Vec::new(); c + 1],
                aligned: vec![None; c],
            };
            if t == center_idx {
                star.aligned = center.iter().map(|&b| Some(b)).collect();
                return star;
            }
            let mut next_center = 0;
            for op in pairwise_align(center, trace) {
                match op {
                    AlignOp::Pair(i, j) => {
                        star.aligned[i] = Some(trace[j]);
                        next_center = i + 1;
                    }
                    AlignOp::OnlyA(i) => next_center = i + 1,
                    AlignOp::OnlyB(j) => star.inserted[next_center].push(trace[j]),
                }
            }
            star
        })
        .collect();
    let mut rows: Vec<Vec<Cell>> = vec![Vec::new(); traces.len()];
    for p in 0..=c {
        let slots = stars.iter().map(|s| s.inserted[p].len()).max().unwrap_or(0);
        for k in 0..slots {
            for (row, star) in rows.iter_mut().zip(&stars) {
                row.push(star.inserted[p].get(k).copied());
            }
        }
        if p < c {
            for (row, star) in rows.iter_mut().zip(&stars) {
                row.push(star.aligned[p]);
            }
        }
    }
    Alignment { rows }
}

/// Treatment of gap-heavy columns in [`majority_vote`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GapMode {
    /// Drop a column when its gap count exceeds the winning base's count.
    #[default]
    Drop,
    /// Vote over the four bases only and never drop a column (all-gap columns excepted).
    Ignore,
}

impl FromStr for GapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(GapMode::Drop),
            "ignore" => Ok(GapMode::Ignore),
            other => Err(Error::InvalidConfig(format!("unknown gap mode {other:?}"))),
        }
    }
}

/// Per-column plurality base (ties broken A < C < G < T), then padded with `A` or
/// truncated to exactly `length` symbols.
pub fn majority_vote(alignment: &Alignment, length: usize, gaps: GapMode) -> DnaSequence {
    let mut out = Vec::with_capacity(alignment.width());
    for j in 0..alignment.width() {
        let mut counts = [0usize; 4];
        let mut gap_count = 0;
        for cell in alignment.column(j) {
            match cell {
                Some(b) => counts[b.index()] += 1,
                None => gap_count += 1,
            }
        }
        let (best, &votes) = counts
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|&(_, c)| *c)
            .expect("four bases");
        if votes == 0 || (gaps == GapMode::Drop && gap_count > votes) {
            continue;
        }
        out.push(Base::from_index(best));
    }
    DnaSequence::new(out).fit_to_length(length)
}
