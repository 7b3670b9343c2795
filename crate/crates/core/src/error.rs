use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitIndex { index: usize, num_qubits: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unbound slot: {0}")]
    Binding(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("encoding strategy {strategy} incompatible with p={p}, N={n}")]
    Strategy { strategy: String, p: usize, n: usize },

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("refusing to overwrite {0} (pass --force)")]
    Exists(PathBuf),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }
}
