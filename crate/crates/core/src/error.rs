use thiserror::Error;

/// Failures surfaced by the library. Each variant maps onto a CLI exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain violation: {what} = {value}")]
    Domain { what: String, value: f64 },

    #[error("coincident spectral parameter: s(z1) = s(z2)")]
    CoincidentSpectralParameter,

    #[error("eigensolver failed to converge on sample {sample_index}")]
    EigenFailure { sample_index: u64 },

    #[error("quadrature did not converge: best estimate {best} with error estimate {error}")]
    Quadrature { best: f64, error: f64 },

    #[error("too many solver failures: {failures} of {samples} samples")]
    TooManyFailures { failures: u64, samples: u64 },

    #[error("{0}")]
    Parse(#[from] crate::formal::ParseError),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(what: impl Into<String>, value: f64) -> Self {
        Error::Domain { what: what.into(), value }
    }

    /// Exit code convention shared by the CLI and the FFI layer.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Domain { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
