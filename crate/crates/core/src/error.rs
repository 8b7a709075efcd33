use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence length must be at least 1")]
    EmptySequence,
    #[error("invalid base {0:?}, expected one of A, C, G, T")]
    InvalidBase(char),
    #[error("invalid token {0:?}")]
    InvalidToken(char),
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("invalid noise distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("instance needs {needed} tokens but the context length is {limit}")]
    ContextOverflow { needed: usize, limit: usize },
    #[error("at least one trace is required")]
    EmptyTraceSet,
    #[error("ground truth sequence is empty")]
    EmptyGroundTruth,
    #[error("alignment does not match traces: {0}")]
    AlignmentMismatch(String),
    #[error("cluster has no edit scripts")]
    MissingEditScripts,
    #[error("edit script does not replay to its trace: {0}")]
    ReplayMismatch(String),
    #[error("malformed edit script: {0}")]
    MalformedEditScript(String),
    #[error(
        "trace of length {trace_len} cannot be explained for L = {length} with drift bound {d_max} \
         (needs {needed}, short by {})",
        needed - d_max
    )]
    UnexplainableTrace {
        trace_len: usize,
        length: usize,
        d_max: usize,
        needed: usize,
    },
    #[error("trace has zero probability under the channel parameters")]
    ImpossibleTrace,
    #[error("no usable trace in cluster")]
    NoUsableTrace,
    #[error("unknown algorithm {name:?}; available: {}", available.join(", "))]
    UnknownAlgorithm {
        name: String,
        available: Vec<&'static str>,
    },
    #[error("{expected} clusters but {found} estimates")]
    CountMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
