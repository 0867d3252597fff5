use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("crop size {size} exceeds image {height}x{width}")]
    CropTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expected 1 or 3 mapping tables, got {0}")]
    WrongTableCount(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("weights file error: {0}")]
    Weights(String),
    #[error("reducer mismatch: model trained with {trained}, asked to evaluate with {requested}")]
    ReducerMismatch { trained: String, requested: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used by the CLI for machine-parsable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedHeader(_) => "malformed-header",
            Error::TruncatedPayload { .. } => "truncated-payload",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::UnsupportedMaxval(_) => "unsupported-maxval",
            Error::CropTooLarge { .. } => "crop-too-large",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::WrongTableCount(_) => "wrong-table-count",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::Empty(_) => "empty-input",
            Error::DegenerateSpectrum(_) => "degenerate-spectrum",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::Manifest(_) => "manifest",
            Error::Weights(_) => "weights",
            Error::ReducerMismatch { .. } => "reducer-mismatch",
            Error::Io { .. } => "io",
        }
    }
}
