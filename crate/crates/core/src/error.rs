use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad parameters or inconsistent geometry.
    Invalid,
    /// File system or file format problems.
    Io,
    /// A numerical target could not be reached (degenerate images, unreachable contrast).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite input sample at index {index}")]
    NonFiniteInput { index: usize },

    #[error(
        "scatterer at (x={x:.6} m, z={z:.6} m) falls outside the temporal record; \
         required duration is {required_duration:.9} s with t0 = {required_t0:.9} s"
    )]
    RecordTooShort {
        x: f64,
        z: f64,
        required_duration: f64,
        required_t0: f64,
    },

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error(
        "target contrast {target:.6} unreachable: achievable range is [{k_min:.6}, {k_max:.6}] \
         for gamma in [{gamma_min}, {gamma_max}]"
    )]
    ContrastUnreachable {
        target: f64,
        k_min: f64,
        k_max: f64,
        gamma_min: f64,
        gamma_max: f64,
    },

    #[error("bad magic {found:?}, expected \"BPWF1\"")]
    BadMagic { found: String },

    #[error("dimension mismatch: expected {expected} bytes of sample data, found {actual}")]
    DimensionMismatch { expected: u64, actual: u64 },

    #[error("header inconsistent: {0}")]
    HeaderInconsistent(String),

    #[error("dataset too large: M*N*T = {m}*{n}*{t} samples overflows addressable memory")]
    DatasetTooLarge { m: u64, n: u64, t: u64 },

    #[error("non-finite sample in data file at flat index {index}")]
    NonFiniteSample { index: usize },

    #[error("malformed JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Geometry(_) | Error::Parameter(_) | Error::NonFiniteInput { .. } | Error::RecordTooShort { .. } => {
                ErrorCategory::Invalid
            }
            Error::DegenerateImage(_) | Error::ContrastUnreachable { .. } => ErrorCategory::Numerical,
            Error::BadMagic { .. }
            | Error::DimensionMismatch { .. }
            | Error::HeaderInconsistent(_)
            | Error::DatasetTooLarge { .. }
            | Error::NonFiniteSample { .. }
            | Error::Json { .. }
            | Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
