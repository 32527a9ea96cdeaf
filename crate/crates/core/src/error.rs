use thiserror::Error;

pub type Result<T> = std::result::Result<T, LatticeError>;

/// Coarse classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("out-of-vocab: item index {index} >= vocabulary size {size}")]
    OutOfVocab { index: usize, size: usize },
    #[error("mode mismatch: expected {expected}, found {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("degenerate series: zero variance")]
    DegenerateSeries,
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("need at least {needed} points for k-means, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty threshold grid")]
    EmptyGrid,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no evaluable sequences")]
    NoEvaluableSequences,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("seed {seed} failed: {source}")]
    SeedRun {
        seed: u64,
        #[source]
        source: Box<LatticeError>,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bundle format: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LatticeError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            LatticeError::InvalidConfig(_) | LatticeError::InvalidSplit(_) | LatticeError::EmptyGrid => {
                ErrorKind::Config
            }
            LatticeError::TrainingDiverged { .. } | LatticeError::DegenerateSeries => ErrorKind::Numerical,
            LatticeError::SeedRun { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
