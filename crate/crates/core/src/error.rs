use thiserror::Error;

/// Errors raised by the samplers, oracles and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("spectrum violation: {0}")]
    SpectrumViolation(String),

    #[error("operator eigenvalue {0} is not below 1; refine the grid or check the kernel")]
    EigenvalueNotBelowOne(f64),

    #[error("rejection sampler exceeded {0} proposals")]
    RejectionCap(u64),

    #[error("{points} points but {amplitudes} amplitudes")]
    AmplitudeCountMismatch { points: usize, amplitudes: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps the error with a short description of what was being computed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
