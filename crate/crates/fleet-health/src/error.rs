//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("feature '{0}' has no observed values to impute from")]
    AllMissing(String),

    #[error("targets contain a single class; both classes are required")]
    SingleClass,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it surfaced in. Already-tagged
    /// errors keep their original stage.
    pub fn with_stage(self, stage: &str) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for ingest
    /// problems, 4 for any stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Ingest(_) => 3,
            Error::Stage { source, .. } => match source.as_ref() {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::Ingest(_) => 3,
                _ => 4,
            },
            _ => 4,
        }
    }
}
