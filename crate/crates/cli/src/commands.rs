//! Subcommand bodies. Each reads its inputs, does its work through an [`Execution`], and
//! commits an [`OutputDir`] only when everything succeeded.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use trecon_core::algorithms::{Algorithm, Reconstruction};
use trecon_core::align::{ground_truth_alignment, GapMode};
use trecon_core::channel::{
    derive_seed, generate_indexed, rng_from_seed, Cluster, ClusterSize, ErrorRates,
    GenerateConfig, NoiseDistribution,
};
use trecon_core::dataset::{
    cluster_by_index, clusters_from_groups, default_context_length, encode_msa_instance,
    encode_training_instance, leakage_filter, strip_trailing_c, subcluster_split, IndexRule,
    LeakageReport, TrainingInstance, Vocabulary,
};
use trecon_core::exec::Execution;
use trecon_core::io::{cluster_to_json, read_clusters, read_estimates, write_clusters, write_estimates};
use trecon_core::metrics::{score, EvalReport, Grouping};
use trecon_core::theory::{run_proposition_experiment, TheoryConfig};
use trecon_core::trellis::TrellisConfig;
use trecon_core::{DnaSequence, Error};

use crate::output::{Manifest, OutputDir};
use crate::{
    ClusterByIndexArgs, EvaluateArgs, ExportArgs, ExportFormat, Gaps, GenerateArgs, GroupBy,
    Hints, Jobs, LeakageArgs, ReconstructArgs, StripArgs, SubclusterArgs, SweepArgs, TheoryArgs,
};

/// Clusters generated per parallel batch before they are written out.
const GENERATE_CHUNK: u64 = 4096;

/// Runs `f` with the requested worker count. Without the `parallel` feature everything
/// runs on the calling thread.
fn with_jobs<T: Send>(jobs: &Jobs, f: impl FnOnce(Execution) -> Result<T> + Send) -> Result<T> {
    if jobs.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.jobs.unwrap_or(0))
            .build()
            .context("cannot start worker pool")?;
        pool.install(|| f(Execution::Parallel))
    }
    #[cfg(not(feature = "parallel"))]
    {
        f(Execution::Sequential)
    }
}

fn load_clusters(path: &Path) -> Result<Vec<Cluster>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_clusters(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn load_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading {}", path.display()))
}

fn parse_size(s: &str) -> Result<ClusterSize> {
    let size: ClusterSize = s.parse()?;
    ensure!(size.max() > 0, "--N must allow at least one trace");
    Ok(size)
}

/// Inclusive `a..b`, `a..=b` or a single level.
fn parse_level_range(s: &str) -> Result<std::ops::RangeInclusive<u32>> {
    let bad = || anyhow::anyhow!("bad level range {s:?}");
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (lo, hi.strip_prefix('=').unwrap_or(hi)),
        None => (s, s),
    };
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    ensure!(lo <= hi, bad());
    Ok(lo..=hi)
}

fn gap_mode(g: Gaps) -> GapMode {
    match g {
        Gaps::Drop => GapMode::Drop,
        Gaps::Ignore => GapMode::Ignore,
    }
}

/// Looks up `name` and applies the per-algorithm overrides in `hints`.
fn build_algorithm(name: &str, hints: &Hints) -> Result<Algorithm> {
    Ok(match Algorithm::from_name(name)? {
        Algorithm::Bmala { .. } => Algorithm::Bmala {
            window: hints.window,
        },
        Algorithm::TrellisBma(_) => Algorithm::TrellisBma(TrellisConfig {
            d_max: hints.dmax,
            max_insertions: hints.imax,
        }),
        Algorithm::MsaMajority(_) => Algorithm::MsaMajority(gap_mode(hints.gaps)),
        Algorithm::OracleMsaMajority(_) => Algorithm::OracleMsaMajority(gap_mode(hints.gaps)),
        other => other,
    })
}

/// Decoder rates: explicit flags, else the mean of the level-`k` noise distribution.
fn hint_rates(hints: &Hints, k: u32) -> Result<ErrorRates> {
    let mean = NoiseDistribution::standard(k).mean();
    Ok(ErrorRates::new(
        hints.p_i.unwrap_or(mean),
        hints.p_d.unwrap_or(mean),
        hints.p_s.unwrap_or(mean),
    )?)
}

/// Reconstructs every cluster in order. Clusters without traces get an empty estimate
/// and a warning; any other failure aborts the run.
fn run_algorithm(
    algorithm: &Algorithm,
    clusters: &[Cluster],
    length: Option<usize>,
    hint: &ErrorRates,
    exec: Execution,
) -> Result<Vec<DnaSequence>> {
    let results = exec.map(clusters, |c| {
        let len = length.unwrap_or(c.ground_truth.len());
        match algorithm.reconstruct(c, len, hint) {
            Err(Error::EmptyTraceSet) => Ok(Reconstruction {
                estimate: DnaSequence::default(),
                warning: Some("no traces".into()),
            }),
            other => other,
        }
    });
    let mut estimates = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let r = r.with_context(|| format!("cluster {} (line {})", i, i + 1))?;
        if let Some(w) = &r.warning {
            eprintln!("warning: cluster {i}: {w}");
        }
        estimates.push(r.estimate);
    }
    Ok(estimates)
}

fn grouping(g: GroupBy) -> Grouping {
    match g {
        GroupBy::None => Grouping::ALL,
        GroupBy::N => Grouping::BY_N,
    }
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let started = Instant::now();
    let noise = NoiseDistribution {
        lower: args.lower,
        upper: args.upper,
        level: args.k,
    };
    noise.validate()?;
    ensure!(args.length > 0, "--L must be at least 1");
    let cfg = GenerateConfig {
        length: args.length,
        size: parse_size(&args.traces)?,
        noise,
        context_length: args.context_length,
    };
    let mut out = OutputDir::create(&args.out)?;
    let mut w = out.writer("clusters.jsonl")?;
    with_jobs(&args.jobs, |exec| {
        let mut start = 0;
        while start < args.count {
            let n = GENERATE_CHUNK.min(args.count - start);
            let batch = exec.map_range(n as usize, |j| {
                generate_indexed(&cfg, args.seed, start + j as u64).map(|c| cluster_to_json(&c))
            });
            for line in batch {
                writeln!(w, "{}", line?)?;
            }
            start += n;
        }
        Ok(())
    })?;
    w.flush()?;
    drop(w);
    let manifest = Manifest::new("generate", Some(args.seed), &args, started).outputs(&["clusters.jsonl"]);
    out.commit(&manifest)
}

pub fn reconstruct(args: ReconstructArgs) -> Result<()> {
    let started = Instant::now();
    let algorithm = build_algorithm(&args.algorithm, &args.hints)?;
    let hint = hint_rates(&args.hints, args.k)?;
    let clusters = load_clusters(&args.dataset)?;
    let estimates = with_jobs(&args.jobs, |exec| run_algorithm(&algorithm, &clusters, args.length, &hint, exec))?;
    let mut out = OutputDir::create(&args.out)?;
    let mut w = out.writer("estimates.txt")?;
    write_estimates(&mut w, &estimates)?;
    w.flush()?;
    drop(w);
    let manifest = Manifest::new("reconstruct", None, &args, started)
        .inputs(&[&args.dataset])
        .outputs(&["estimates.txt"]);
    out.commit(&manifest)
}

fn write_report(out: &mut OutputDir, stem: &str, report: &EvalReport) -> Result<()> {
    out.write(&format!("{stem}.csv"), &report.to_csv())?;
    out.write(&format!("{stem}.json"), &(report.to_json() + "\n"))
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let clusters = load_clusters(&args.dataset)?;
    let (name, estimates) = match (&args.estimates, &args.algorithm) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let est = read_estimates(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
            (args.name.clone(), est)
        }
        (None, Some(name)) => {
            let algorithm = build_algorithm(name, &args.hints)?;
            let hint = hint_rates(&args.hints, args.k)?;
            let est = with_jobs(&args.jobs, |exec| run_algorithm(&algorithm, &clusters, None, &hint, exec))?;
            (algorithm.name().to_string(), est)
        }
        (None, None) => bail!("pass --estimates or --algorithm"),
    };
    let report = score(&name, &clusters, &estimates, grouping(args.group_by), args.k)?;
    let mut out = OutputDir::create(&args.out)?;
    write_report(&mut out, "report", &report)?;
    let mut inputs = vec![args.dataset.as_path()];
    inputs.extend(args.estimates.as_deref());
    let manifest = Manifest::new("evaluate", None, &args, started)
        .inputs(&inputs)
        .outputs(&["report.csv", "report.json"]);
    out.commit(&manifest)
}

/// Rates given to the decoders at sweep level `k`. TrellisBMA keeps the level-0 mean, as
/// if tuned once on the training distribution; VS follows the level.
fn sweep_hint(algorithm: &str, k: u32) -> ErrorRates {
    let level = if algorithm == "trellis-bma" { 0 } else { k };
    ErrorRates::uniform(NoiseDistribution::standard(level).mean())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let started = Instant::now();
    let levels = parse_level_range(&args.k_range)?;
    let size = parse_size(&args.traces)?;
    ensure!(args.length > 0, "--L must be at least 1");
    ensure!(args.count > 0, "--count must be at least 1");
    let algorithms = args
        .algorithms
        .iter()
        .map(|n| build_algorithm(n, &Hints::defaults()))
        .collect::<Result<Vec<_>>>()?;
    let report = with_jobs(&args.jobs, |exec| {
        let mut report = EvalReport::default();
        for k in levels.clone() {
            let noise = NoiseDistribution::standard(k);
            noise.validate()?;
            let cfg = GenerateConfig::new(args.length, size.clone(), noise);
            let master = derive_seed(args.seed, u64::from(k));
            let clusters = exec
                .map_range(args.count as usize, |i| generate_indexed(&cfg, master, i as u64))
                .into_iter()
                .collect::<trecon_core::Result<Vec<_>>>()?;
            for algorithm in &algorithms {
                let hint = sweep_hint(algorithm.name(), k);
                let est = run_algorithm(algorithm, &clusters, None, &hint, exec)?;
                report.extend(score(algorithm.name(), &clusters, &est, grouping(args.group_by), k)?);
            }
        }
        Ok(report)
    })?;
    let mut out = OutputDir::create(&args.out)?;
    write_report(&mut out, "sweep", &report)?;
    let manifest = Manifest::new("sweep", Some(args.seed), &args, started).outputs(&["sweep.csv", "sweep.json"]);
    out.commit(&manifest)
}

#[derive(Serialize)]
struct ExportReport {
    format: ExportFormat,
    context_length: usize,
    clusters: usize,
    written: usize,
    skipped_overflow: usize,
}

/// Default budget for alignment targets: the prompt window plus one gapped row of up to
/// `2 L` columns per trace.
fn default_msa_context(length: usize, max_traces: usize) -> usize {
    max_traces * ((5 * length).div_ceil(4) + 1) + max_traces * (2 * length + 1) + 1
}

pub fn export(args: ExportArgs) -> Result<()> {
    let started = Instant::now();
    let clusters = load_clusters(&args.dataset)?;
    let max_len = clusters.iter().map(|c| c.ground_truth.len()).max().unwrap_or(0);
    let max_traces = clusters.iter().map(Cluster::len).max().unwrap_or(0);
    let context = args.context_length.unwrap_or(match args.format {
        ExportFormat::LmText => default_context_length(max_len, max_traces),
        ExportFormat::MsaText => default_msa_context(max_len, max_traces),
    });
    let encoded: Vec<trecon_core::Result<TrainingInstance>> = with_jobs(&args.jobs, |exec| {
        Ok(exec.map(&clusters, |c| match args.format {
            ExportFormat::LmText => encode_training_instance(c, Some(context)),
            ExportFormat::MsaText => {
                ground_truth_alignment(c).and_then(|a| encode_msa_instance(c, &a, Some(context)))
            }
        }))
    })?;
    let mut out = OutputDir::create(&args.out)?;
    let mut w = out.writer("dataset.txt")?;
    if args.header {
        let vocab = match args.format {
            ExportFormat::LmText => Vocabulary::BASIC,
            ExportFormat::MsaText => Vocabulary::MSA,
        };
        writeln!(w, "{}", vocab.header())?;
    }
    let mut report = ExportReport {
        format: args.format,
        context_length: context,
        clusters: clusters.len(),
        written: 0,
        skipped_overflow: 0,
    };
    for (i, inst) in encoded.into_iter().enumerate() {
        let inst = match inst {
            Err(Error::ContextOverflow { .. }) => {
                report.skipped_overflow += 1;
                continue;
            }
            other => other.with_context(|| format!("cluster {} (line {})", i, i + 1))?,
        };
        let line = if args.pad {
            inst.to_padded_text(context)?
        } else {
            inst.to_text()
        };
        writeln!(w, "{line}")?;
        report.written += 1;
    }
    w.flush()?;
    drop(w);
    if report.skipped_overflow > 0 {
        eprintln!(
            "skipped {} of {} clusters exceeding {context} tokens",
            report.skipped_overflow, report.clusters
        );
    }
    out.write("export_report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let manifest = Manifest::new("export", None, &args, started)
        .inputs(&[&args.dataset])
        .outputs(&["dataset.txt", "export_report.json"]);
    out.commit(&manifest)
}

fn commit_clusters(
    out: &mut OutputDir,
    clusters: &[Cluster],
) -> Result<()> {
    let mut w = out.writer("clusters.jsonl")?;
    write_clusters(&mut w, clusters)?;
    w.flush()?;
    Ok(())
}

pub fn cluster_by_index_cmd(args: ClusterByIndexArgs) -> Result<()> {
    let started = Instant::now();
    let rule = match (args.prefix, args.delimiter) {
        (Some(n), None) => IndexRule::Prefix(n),
        (None, Some(d)) => IndexRule::Delimiter(d),
        _ => bail!("pass exactly one of --prefix and --delimiter"),
    };
    let mut references = BTreeMap::new();
    if let Some(path) = &args.references {
        for (i, line) in load_lines(path)?.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(index), Some(seq), None) = (parts.next(), parts.next(), parts.next()) else {
                bail!("{} line {}: expected `index sequence`", path.display(), i + 1);
            };
            let seq: DnaSequence = seq
                .parse()
                .with_context(|| format!("{} line {}", path.display(), i + 1))?;
            references.insert(index.to_string(), seq);
        }
    }
    let allowed: Option<HashSet<String>> = args.references.as_ref().map(|_| references.keys().cloned().collect());
    let reads = load_lines(&args.reads)?;
    // grouping is a single ordered pass; the worker count is only validated
    let (groups, report) = with_jobs(&args.jobs, |_| {
        Ok(cluster_by_index(
            reads.iter().map(String::as_str).filter(|l| !l.trim().is_empty()),
            &rule,
            allowed.as_ref(),
        ))
    })?;
    let clusters = clusters_from_groups(groups, &references);
    let mut out = OutputDir::create(&args.out)?;
    commit_clusters(&mut out, &clusters)?;
    out.write("index_report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let mut inputs = vec![args.reads.as_path()];
    inputs.extend(args.references.as_deref());
    let manifest = Manifest::new("preprocess cluster-by-index", None, &args, started)
        .inputs(&inputs)
        .outputs(&["clusters.jsonl", "index_report.json"]);
    out.commit(&manifest)
}

pub fn subcluster(args: SubclusterArgs) -> Result<()> {
    let started = Instant::now();
    ensure!(
        args.min >= 1 && args.min <= args.max,
        "need 1 <= --min <= --max"
    );
    let clusters = load_clusters(&args.dataset)?;
    let parts = with_jobs(&args.jobs, |exec| {
        let parts = exec.map_range(clusters.len(), |i| {
            let mut rng = rng_from_seed(derive_seed(args.seed, i as u64));
            subcluster_split(&clusters[i], args.min, args.max, &mut rng)
        });
        Ok(parts.into_iter().collect::<trecon_core::Result<Vec<_>>>()?)
    })?;
    let parts: Vec<Cluster> = parts.into_iter().flatten().collect();
    let mut out = OutputDir::create(&args.out)?;
    commit_clusters(&mut out, &parts)?;
    let manifest = Manifest::new("preprocess subcluster", Some(args.seed), &args, started)
        .inputs(&[&args.dataset])
        .outputs(&["clusters.jsonl"]);
    out.commit(&manifest)
}

pub fn leakage_filter_cmd(args: LeakageArgs) -> Result<()> {
    let started = Instant::now();
    ensure!(args.dmin <= args.dmax, "need --dmin <= --dmax");
    let train = load_clusters(&args.dataset)?;
    let test: Vec<DnaSequence> = load_clusters(&args.test)?
        .into_iter()
        .map(|c| c.ground_truth)
        .collect();
    let filtered = with_jobs(&args.jobs, |exec| {
        Ok(exec.map(&train, |c| leakage_filter(std::slice::from_ref(c), &test, args.dmin, args.dmax)))
    })?;
    let mut kept = Vec::new();
    let mut report = LeakageReport::default();
    for (clusters, r) in filtered {
        kept.extend(clusters);
        report.traces_in += r.traces_in;
        report.traces_removed += r.traces_removed;
        report.clusters_in += r.clusters_in;
        report.clusters_dropped += r.clusters_dropped;
    }
    let mut out = OutputDir::create(&args.out)?;
    commit_clusters(&mut out, &kept)?;
    out.write("leakage_report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let manifest = Manifest::new("preprocess leakage-filter", None, &args, started)
        .inputs(&[&args.dataset, &args.test])
        .outputs(&["clusters.jsonl", "leakage_report.json"]);
    out.commit(&manifest)
}

/// Stripping changes the traces, so edit scripts of a modified cluster no longer replay
/// and are dropped.
pub fn strip_c(args: StripArgs) -> Result<()> {
    let started = Instant::now();
    let input = load_clusters(&args.dataset)?;
    let clusters = with_jobs(&args.jobs, |exec| {
        Ok(exec.map(&input, |c| {
            let mut c = c.clone();
            let stripped: Vec<_> = c.traces.iter().map(strip_trailing_c).collect();
            if stripped != c.traces {
                c.edits = None;
            }
            c.traces = stripped;
            if args.drop_empty {
                c.traces.retain(|t| !t.is_empty());
            }
            c
        }))
    })?;
    let mut out = OutputDir::create(&args.out)?;
    commit_clusters(&mut out, &clusters)?;
    let manifest = Manifest::new("preprocess strip-c", None, &args, started)
        .inputs(&[&args.dataset])
        .outputs(&["clusters.jsonl"]);
    out.commit(&manifest)
}

pub fn theory(args: TheoryArgs) -> Result<()> {
    let started = Instant::now();
    ensure!(!args.k.is_empty(), "--k needs at least one value");
    let m = args.m.unwrap_or_else(|| args.k.iter().copied().max().unwrap_or(1));
    let configs: Vec<TheoryConfig> = args
        .k
        .iter()
        .map(|&k| TheoryConfig {
            n: args.n,
            m,
            k,
            p: args.p,
            samples: args.samples,
            delta: args.delta,
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let reports = with_jobs(&args.jobs, |exec| {
        configs
            .iter()
            .map(|c| {
                let mut rng = rng_from_seed(derive_seed(args.seed, c.k as u64));
                Ok(run_proposition_experiment(c, args.trials, &mut rng, exec)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = String::from("k,n,p,N,delta,empirical_err,bayes_err,bound,trials\n");
    for r in &reports {
        let c = &r.config;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.k,
            c.n,
            c.p,
            c.samples,
            c.delta,
            r.mean_error(),
            r.bayes_error,
            r.bound,
            r.trials.len()
        ));
    }
    let mut out = OutputDir::create(&args.out)?;
    out.write("theory.csv", &csv)?;
    out.write("theory_trials.json", &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    let manifest = Manifest::new("theory", Some(args.seed), &args, started)
        .outputs(&["theory.csv", "theory_trials.json"]);
    out.commit(&manifest)
}
