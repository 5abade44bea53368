use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: UE coincides with the panel center")]
    DegenerateGeometry,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge (best estimate {value:e} +/- {error:e})")]
    Quadrature { value: f64, error: f64 },

    #[error("quadrature failed for element {index}: {source}")]
    ElementQuadrature {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular MMSE matrix")]
    SingularMmse,

    #[error("epsilon integral diverges for alpha = {alpha} (requires alpha > 1)")]
    EpsilonDiverges { alpha: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
