use std::path::PathBuf;

use thiserror::Error;

/// Broad class of a failure, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },

    #[error("unknown label at row {row}: {token:?}")]
    UnknownLabel { row: usize, token: String },

    #[error("annotation error at line {line}: {msg}")]
    Annotation { line: usize, msg: String },

    #[error("annotation block for unknown sample id {0:?}")]
    UnknownSampleId(String),

    #[error("BIO violation in sample {sample:?} at token {token} ({form:?}): {tag} does not continue an entity")]
    BioViolation {
        sample: String,
        token: usize,
        form: String,
        tag: String,
    },

    #[error("samples without annotations: {}", .0.join(", "))]
    MissingAnnotations(Vec<String>),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("variant {variant} requires {field} annotations")]
    MissingField {
        variant: &'static str,
        field: &'static str,
    },

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("model input mismatch: {0}")]
    RepresentationMismatch(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("{cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
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

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::MalformedRow { .. }
            | Error::UnknownLabel { .. }
            | Error::Annotation { .. }
            | Error::UnknownSampleId(_)
            | Error::BioViolation { .. }
            | Error::MissingAnnotations(_)
            | Error::MissingField { .. }
            | Error::Serde(_) => ErrorKind::Data,
            Error::Stage { source, .. } | Error::Cell { source, .. } => source.kind(),
            _ => ErrorKind::Runtime,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
