use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the needlet toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The spectrum is undefined at the requested multipole.
    #[error("power spectrum undefined at l = {0} (the mean mode carries no power)")]
    ZeroMultipole(i64),

    /// A spectrum profile produced a non-positive or non-finite value.
    #[error("spectrum profile g({index}) = {value} is not strictly positive and finite")]
    NonPositiveProfile { index: usize, value: f64 },

    /// A tabulated profile was queried past its last entry.
    #[error("tabulated profile has no entry for l = {index} (table ends at {len})")]
    ProfileOutOfRange { index: usize, len: usize },

    #[error("field bandwidth {available} is too small: l_max >= {required} is required")]
    InsufficientBandwidth { required: usize, available: usize },

    #[error("grid of {samples} samples is coarser than the {coefficients}-point coefficient lattice")]
    GridTooCoarse { samples: usize, coefficients: usize },

    /// A trigonometric polynomial has content the truncated frame cannot reproduce.
    #[error("function has degree {degree}, above the frame resolution 2^J = {limit}")]
    BandLimitExceeded { degree: usize, limit: usize },

    #[error("normalizing variance is zero or not finite")]
    DegenerateVariance,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// An identity that holds exactly in theory failed numerically.
    #[error("numerical consistency failure: {0}")]
    Consistency(String),

    #[error("I/O error on {path}")]
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

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of an internal numerical identity, as opposed to bad input.
    pub fn is_consistency_failure(&self) -> bool {
        matches!(self, Error::Consistency(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
