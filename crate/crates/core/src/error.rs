use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("degenerate annotation: pupil and iris boundaries coincide at angle {theta:.6} rad")]
    DegenerateAnnotation { theta: f64 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("input {height}x{width} is too small, both sides must be at least {min}")]
    InputTooSmall { height: usize, width: usize, min: usize },

    #[error("tap {tap} out of range 1..={max}")]
    TapOutOfRange { tap: usize, max: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("incomplete weights: missing [{}], unexpected [{}]", missing.join(", "), extra.join(", "))]
    Incomplete { missing: Vec<String>, extra: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("degenerate scores: {0}")]
    DegenerateScores(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("tap {tap}: {source}")]
    AtTap {
        tap: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_tap(self, tap: usize) -> Self {
        Error::AtTap { tap, source: Box::new(self) }
    }
}
