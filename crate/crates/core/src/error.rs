use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed PGM: {0}")]
    Parse(String),
    #[error("PGM payload truncated: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported image format (magic {0:?})")]
    UnsupportedFormat(String),
    #[error("image has zero variance or zero power; {0} is undefined")]
    ConstantImage(&'static str),
    #[error("resampled size {width}x{height} is below the 2x2 minimum")]
    DegenerateSize { width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image {width}x{height} is too small: {reason}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        reason: String,
    },
    #[error("regression needs at least 2 layers, got {0}")]
    InsufficientLayers(usize),
    #[error("pixel ({x}, {y}) is closer than the sampling radius to the border")]
    BorderViolation { x: usize, y: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("negative value {0} has no real square root")]
    Domain(f64),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("unknown class {0}")]
    UnknownClass(usize),
    #[error("model has no classes")]
    EmptyModel,
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
