use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value violates its contract.
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    /// A required configuration key was not supplied.
    #[error("missing required key `{0}`")]
    MissingKey(String),

    /// The configuration document could not be parsed.
    #[error("cannot parse configuration: {0}")]
    Parse(String),

    /// The operation does not support the given input (e.g. complex J in the
    /// population-coherence representation).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("population diverged at t = {time} (|psi|^2 = {population:e})")]
    Divergence { time: f64, population: f64 },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// The steady coherence is undefined because the radicand of the
    /// closed-form ReΘ is negative.
    #[error("steady coherence undefined: radicand {radicand:e} < 0 (pump imbalance too large)")]
    NegativeRadicand { radicand: f64 },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("time {0} is not on the recorded grid")]
    OffGrid(f64),

    #[error("window exceeds trajectory extent: {0}")]
    Window(String),

    #[error("too few usable points for a fit: {usable} < {required}")]
    TooFewPoints { usable: usize, required: usize },

    #[error("correlation series have no overlapping lags")]
    EmptyOverlap,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (divergence, undefined steady state)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NegativeRadicand { .. } => true,
            Error::Realization { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// The configuration key this error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            Error::Invalid { key, .. } | Error::MissingKey(key) => Some(key),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
