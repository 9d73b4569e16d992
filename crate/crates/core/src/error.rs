use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid shape {rows}x{cols}: {reason}")]
    InvalidShape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("zero-norm vector{}", context_suffix(.context))]
    ZeroNorm { context: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("duplicate utterance id `{0}`")]
    DuplicateUtterance(String),

    #[error("unknown utterance id `{0}`")]
    UnknownUtterance(String),

    #[error("self-trial: enroll and test are both `{0}`")]
    SelfTrial(String),

    #[error("duplicate trial key ({0}, {1})")]
    DuplicateTrial(String, String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsatisfiable request: {0}")]
    Unsatisfiable(String),

    #[error("need at least 2 speakers, dataset has {0}")]
    TooFewSpeakers(usize),

    #[error("no eligible anchor: every speaker has a single utterance")]
    NoEligibleAnchor,

    #[error("degenerate projection: projected vector has zero norm{}; re-initialize the projection", context_suffix(.0))]
    DegenerateProjection(String),

    #[error("projection collapses {} utterance(s) to zero norm: {}", .0.len(), .0.join(", "))]
    ZeroProjected(Vec<String>),

    #[error("training diverged at epoch {epoch} (non-finite loss); try a smaller learning rate")]
    Diverged { epoch: usize },

    #[error("requested output dimension {requested} exceeds the rank bound; max feasible is {max}")]
    RankBound { requested: usize, max: usize },

    #[error("score sets have different trial keys; missing from a: [{missing_in_a}]; missing from b: [{missing_in_b}]")]
    KeyMismatch {
        missing_in_a: String,
        missing_in_b: String,
    },

    #[error("trial ({0}, {1}) has no score")]
    MissingScore(String, String),

    #[error("evaluation needs at least one {0} trial")]
    EmptyClass(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
