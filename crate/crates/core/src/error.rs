use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing field {field} at line {line}")]
    MissingField { field: String, line: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty token sequence")]
    EmptySequence,

    #[error("no common template for cluster")]
    NoCommonTemplate,

    #[error("no uploads to aggregate")]
    NoUploads,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("unknown template id {template_id} (rule at line {line})")]
    UnknownTemplate { template_id: String, line: usize },

    #[error("rule at line {line} references slot {slot} but template {template_id} has {n_slots} slots")]
    SlotOutOfRange {
        line: usize,
        slot: u32,
        template_id: String,
        n_slots: u32,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
