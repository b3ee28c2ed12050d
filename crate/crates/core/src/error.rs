use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: class `{class}` is not listed in the grouping config")]
    UnknownClass {
        path: PathBuf,
        line: usize,
        class: String,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node id {id} out of range for {n} nodes ({context})")]
    IdOutOfRange {
        id: usize,
        n: usize,
        context: &'static str,
    },

    #[error("node {0} appears in both the train and test split")]
    OverlappingSplit(usize),

    #[error("node {0} appears more than once in the {1} split")]
    DuplicateSplitId(usize, &'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("{0} is not symmetric")]
    NotSymmetric(String),

    #[error("{what} has negative diagonal entry {value:e} at index {index}")]
    NegativeDiagonal {
        what: String,
        index: usize,
        value: f64,
    },

    #[error("{what} is not positive semidefinite within tolerance{}", layer_suffix(*.layer))]
    NotPsd { what: String, layer: Option<usize> },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("labeled node set is empty")]
    EmptyLabeledSet,

    #[error("test node set is empty")]
    EmptyTestSet,

    #[error("labels must be +1 or -1, found {0}")]
    InvalidLabel(f64),

    #[error(
        "kernel block is numerically singular even with ridge {ridge:e} after {attempts} attempts; \
         pass a larger ridge"
    )]
    SingularKernel { ridge: f64, attempts: usize },

    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing state: {0}")]
    MissingState(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn layer_suffix(layer: Option<usize>) -> String {
    match layer {
        Some(l) => format!(" (layer {l})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
