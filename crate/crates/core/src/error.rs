use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("configuration has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    Schema(Vec<String>),

    #[error("level {level} is outside the frame (jmax = {jmax})")]
    LevelOutOfRange { level: usize, jmax: usize },

    #[error("index k = {k} is outside level {level} (K = {count})")]
    IndexOutOfRange { level: usize, k: usize, count: usize },

    #[error("truncation level J = {requested} needs a frame built with jmax >= {requested} (frame has jmax = {jmax})")]
    FrameTooShallow { requested: usize, jmax: usize },

    #[error("frame level {level} would hold {count} cubature points, above the cap of {cap}")]
    ResourceLimit { level: usize, count: u128, cap: u128 },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("function returned a non-finite value {value} at {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },

    #[error("coefficient layout does not match the frame: {0}")]
    LevelMismatch(String),

    #[error("sample set is empty")]
    EmptySample,

    #[error("sample size n = {0} is too small (need n >= 3)")]
    SampleTooSmall(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
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

    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidConfig(_)
            | Error::Schema(_)
            | Error::LevelOutOfRange { .. }
            | Error::IndexOutOfRange { .. }
            | Error::FrameTooShallow { .. }
            | Error::ResourceLimit { .. }
            | Error::SampleTooSmall(_)
            | Error::Parse { .. }
            | Error::EmptySample => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
