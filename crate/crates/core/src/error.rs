use std::fmt;
use std::io;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the clustering, memory, and pipeline operations.
#[derive(Debug)]
pub enum Error {
    /// An operation received an empty input it cannot work with.
    EmptyInput(&'static str),
    /// Tensor or vector extents do not agree.
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    /// A value that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// l2 normalization of an exactly zero vector.
    ZeroVector(&'static str),
    /// A scalar parameter is outside its documented range.
    InvalidParameter { name: &'static str, message: String },
    /// A probability that must be strictly positive was not.
    NonPositiveProbability(&'static str),
    /// A batch sample carries a cluster label the memory bank does not know.
    UnknownLabel { label: i64 },
    /// A foreground pixel was left without a cluster assignment.
    UncoveredPixel { row: usize, col: usize },
    /// Clustering produced no usable clusters.
    AllOutliers { num_samples: usize },
    /// Tensor file does not start with the expected magic bytes.
    BadMagic,
    /// Tensor file format version is not supported.
    UnsupportedVersion(u32),
    /// Tensor file declares a rank above the supported maximum.
    RankTooLarge(u32),
    /// Tensor file payload ends before the declared extents are satisfied.
    Truncated,
    /// Configuration file or override could not be parsed or validated.
    Config(String),
    /// Underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyInput(what) => write!(f, "empty input: {what}"),
            Self::ShapeMismatch {
                context,
                expected,
                actual,
            } => write!(
                f,
                "shape mismatch in {context}: expected {expected:?}, got {actual:?}"
            ),
            Self::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Self::ZeroVector(what) => write!(f, "cannot l2-normalize zero vector: {what}"),
            Self::InvalidParameter { name, message } => {
                write!(f, "invalid parameter {name}: {message}")
            }
            Self::NonPositiveProbability(what) => {
                write!(f, "probability must be positive: {what}")
            }
            Self::UnknownLabel { label } => write!(f, "unknown cluster label {label}"),
            Self::UncoveredPixel { row, col } => {
                write!(f, "foreground pixel ({row},{col}) has no cluster assignment")
            }
            Self::AllOutliers { num_samples } => write!(
                f,
                "density clustering marked all {num_samples} samples as outliers; \
                 lower dbscan_min_samples or raise dbscan_eps"
            ),
            Self::BadMagic => write!(f, "tensor file has wrong magic bytes"),
            Self::UnsupportedVersion(v) => write!(f, "tensor file version {v} not supported"),
            Self::RankTooLarge(r) => write!(f, "tensor rank {r} exceeds maximum of 4"),
            Self::Truncated => write!(f, "tensor file payload is truncated"),
            Self::Config(msg) => write!(f, "config error: {msg}"),
            Self::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Self::Io(err)
    }
}
