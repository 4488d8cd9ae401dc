use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported/corrupt format: {0}")]
    Format(String),

    #[error("zero-dimension or degenerate image: {width}x{height} (minimum is 2x2)")]
    DegenerateImage { width: usize, height: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch{}: expected {}x{}, found {}x{}",
        .index.map(|i| format!(" at image {i}")).unwrap_or_default(),
        .expected.0, .expected.1, .found.0, .found.1)]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
        index: Option<usize>,
    },

    #[error("stationary point at (col {col}, row {row})")]
    Stationary { col: usize, row: usize },

    #[error("orbit is not closed")]
    OpenOrbit,

    #[error("orbit has {len} points, at least {min} required")]
    OrbitTooShort { len: usize, min: usize },

    #[error("degenerate polygon: zero signed area")]
    DegeneratePolygon,

    #[error("invalid orbit: {0}")]
    InvalidOrbit(String),

    #[error("no orbits could be extracted from the canonical image")]
    NoOrbits,

    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("training data must contain both classes")]
    OneClass,

    #[error("feature index {index} missing from a vector of length {len}")]
    MissingFeature { index: usize, len: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
