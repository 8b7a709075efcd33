//! `trecon`: generation, preprocessing, reconstruction, evaluation, sweeps, dataset export
//! and the generalization-bound experiment, each writing into an output directory with a
//! `manifest.json`.

mod commands;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "trecon", version, about = "Trace reconstruction toolkit for DNA data storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate clusters through the IDS channel.
    Generate(GenerateArgs),
    /// Run one algorithm over a cluster file.
    Reconstruct(ReconstructArgs),
    /// Score estimates (or a freshly run algorithm) against ground truths.
    Evaluate(EvaluateArgs),
    /// Evaluate algorithms across noise levels.
    Sweep(SweepArgs),
    /// Write language-model text datasets.
    Export(ExportArgs),
    /// Real-data preprocessing steps.
    #[command(subcommand)]
    Preprocess(PreprocessCommand),
    /// Logistic-regression generalization experiment on the binary substitution model.
    Theory(TheoryArgs),
}

/// Worker count; falls back to `TRECON_JOBS`, then to the available parallelism.
#[derive(Args, Clone, Debug, Serialize)]
pub struct Jobs {
    #[arg(long, env = "TRECON_JOBS")]
    pub jobs: Option<usize>,
}

/// Decoder channel assumptions. Missing rates default to the mean of the noise
/// distribution at `--k`.
#[derive(Args, Clone, Debug, Serialize)]
pub struct Hints {
    #[arg(long = "pi")]
    pub p_i: Option<f64>,
    #[arg(long = "pd")]
    pub p_d: Option<f64>,
    #[arg(long = "ps")]
    pub p_s: Option<f64>,
    /// Trellis drift bound.
    #[arg(long)]
    pub dmax: Option<usize>,
    /// Trellis insertion-run cap (exact when omitted).
    #[arg(long)]
    pub imax: Option<usize>,
    /// BMALA look-ahead window.
    #[arg(long, default_value_t = trecon_core::baselines::BMALA_WINDOW)]
    pub window: usize,
    /// Majority-vote treatment of gap-heavy columns.
    #[arg(long, value_enum, default_value_t = Gaps::Drop)]
    pub gaps: Gaps,
}

impl Hints {
    /// Every override unset.
    pub fn defaults() -> Self {
        Hints {
            p_i: None,
            p_d: None,
            p_s: None,
            dmax: None,
            imax: None,
            window: trecon_core::baselines::BMALA_WINDOW,
            gaps: Gaps::Drop,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gaps {
    Drop,
    Ignore,
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    /// Ground-truth length.
    #[arg(long = "L", alias = "length")]
    pub length: usize,
    /// Traces per cluster: `5` or an inclusive range `2..10`.
    #[arg(long = "N", alias = "traces")]
    pub traces: String,
    /// Noise sweep level.
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    /// Lower end of the base error-rate interval.
    #[arg(long, default_value_t = 0.01)]
    pub lower: f64,
    /// Upper end of the base error-rate interval.
    #[arg(long, default_value_t = 0.10)]
    pub upper: f64,
    #[arg(long)]
    pub count: u64,
    #[arg(long)]
    pub seed: u64,
    /// Redraw clusters whose training instance exceeds this many tokens.
    #[arg(long)]
    pub context_length: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Args, Debug, Serialize)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub algorithm: String,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Estimate length; defaults to each cluster's ground-truth length.
    #[arg(long = "L", alias = "length")]
    pub length: Option<usize>,
    /// Sweep level used for default hints.
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    #[command(flatten)]
    pub hints: Hints,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    None,
    #[value(name = "N")]
    #[serde(rename = "N")]
    N,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Estimates file, one line per cluster.
    #[arg(long, conflicts_with = "algorithm", required_unless_present = "algorithm")]
    pub estimates: Option<PathBuf>,
    /// Run this algorithm instead of reading estimates.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Label used for the algorithm column when scoring an estimates file.
    #[arg(long, default_value = "estimates")]
    pub name: String,
    #[arg(long, value_enum, default_value_t = GroupBy::N)]
    pub group_by: GroupBy,
    /// Sweep level recorded in the report and used for default hints.
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    #[command(flatten)]
    pub hints: Hints,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',', default_value = "bma,bmala,vs,trellis-bma,msa-majority")]
    pub algorithms: Vec<String>,
    #[arg(long = "L", alias = "length", default_value_t = 110)]
    pub length: usize,
    #[arg(long = "N", alias = "traces", default_value = "2..10")]
    pub traces: String,
    /// Inclusive level range, e.g. `0..10`.
    #[arg(long, default_value = "0..10")]
    pub k_range: String,
    /// Clusters per level.
    #[arg(long)]
    pub count: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = GroupBy::None)]
    pub group_by: GroupBy,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    LmText,
    MsaText,
}

#[derive(Args, Debug, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub format: ExportFormat,
    /// Token budget per line; defaults to the standard window for the dataset's L and N.
    #[arg(long)]
    pub context_length: Option<usize>,
    /// Left-pad every line with `#` to the context length.
    #[arg(long)]
    pub pad: bool,
    /// Start the file with the vocabulary header line.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Subcommand)]
enum PreprocessCommand {
    /// Group raw reads by their index field.
    ClusterByIndex(ClusterByIndexArgs),
    /// Split clusters into random subclusters of 2 to 10 traces.
    Subcluster(SubclusterArgs),
    /// Remove training traces close to test ground truths.
    LeakageFilter(LeakageArgs),
    /// Remove trailing C runs from every trace.
    StripC(StripArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ClusterByIndexArgs {
    /// One raw read per line.
    #[arg(long)]
    pub reads: PathBuf,
    /// Index is the first N characters.
    #[arg(long, conflicts_with = "delimiter", required_unless_present = "delimiter")]
    pub prefix: Option<usize>,
    /// Index and trace are separated by this character.
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Ground truths as `index sequence` lines; reads with other indices are discarded.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Args, Debug, Serialize)]
pub struct SubclusterArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub min: usize,
    #[arg(long, default_value_t = 10)]
    pub max: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Args, Debug, Serialize)]
pub struct LeakageArgs {
    /// Training clusters.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Test clusters; only their ground truths are used.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub dmin: usize,
    #[arg(long, default_value_t = 13)]
    pub dmax: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Args, Debug, Serialize)]
pub struct StripArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Drop traces that become empty.
    #[arg(long)]
    pub drop_empty: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Args, Debug, Serialize)]
pub struct TheoryArgs {
    /// Sequence length in bits.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Copies available; defaults to the largest k.
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated copy counts used by the estimator.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,9,15")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    /// Training examples per trial.
    #[arg(long = "N", alias = "samples")]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Export(a) => commands::export(a),
        Command::Preprocess(PreprocessCommand::ClusterByIndex(a)) => commands::cluster_by_index_cmd(a),
        Command::Preprocess(PreprocessCommand::Subcluster(a)) => commands::subcluster(a),
        Command::Preprocess(PreprocessCommand::LeakageFilter(a)) => commands::leakage_filter_cmd(a),
        Command::Preprocess(PreprocessCommand::StripC(a)) => commands::strip_c(a),
        Command::Theory(a) => commands::theory(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
