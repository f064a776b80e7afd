use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fold count: k = {k} with n = {n} (need 2 <= k <= n)")]
    InvalidFoldCount { n: usize, k: usize },

    #[error("malformed loss matrix: {0}")]
    MalformedLossMatrix(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("leverage singularity at point {index}: |1 - h_i| = {gap:e}")]
    LeverageSingularity { index: usize, gap: f64 },

    #[error("within-fold variance undefined: fold {fold} has {size} point(s)")]
    WithinFoldUndefined { fold: usize, size: usize },

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("inconclusive: zero variance and zero mean difference")]
    InconclusiveDegenerate,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient folds: {0}")]
    InsufficientFolds(String),

    #[error("insufficient repetitions: {0}")]
    InsufficientRepetitions(String),

    #[error("degenerate diagnostic: {0}")]
    DegenerateDiagnostic(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_replication(self, index: usize) -> Self {
        Error::Replication {
            index,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used by the CLI's structured error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidFoldCount { .. } => "invalid-fold-count",
            Error::MalformedLossMatrix(_) => "malformed-loss-matrix",
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidConfiguration(_) => "invalid-configuration",
            Error::SingularSystem(_) => "singular-system",
            Error::LeverageSingularity { .. } => "leverage-singularity",
            Error::WithinFoldUndefined { .. } => "within-fold-undefined",
            Error::InconsistentInputs(_) => "inconsistent-inputs",
            Error::InvalidProbability(_) => "invalid-probability",
            Error::InconclusiveDegenerate => "inconclusive-degenerate",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InsufficientFolds(_) => "insufficient-folds",
            Error::InsufficientRepetitions(_) => "insufficient-repetitions",
            Error::DegenerateDiagnostic(_) => "degenerate-diagnostic",
            Error::Fold { source, .. } | Error::Replication { source, .. } => source.code(),
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
