use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid physical input: quantum numbers, couplings, probabilities,
    /// state populations and the like.
    #[error("domain error: {0}")]
    Domain(String),

    /// A protocol program could not be constructed.
    #[error("program build error: {0}")]
    Build(String),

    /// Readout or run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Population estimation from a spectrum failed.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// The asymptotic pumping limit is undefined (no contraction).
    #[error("limit undefined: p_a and p_b are both zero")]
    UndefinedLimit,

    /// An internal numerical consistency check failed.
    #[error("numerical check failed: {0}")]
    Numerics(String),

    /// Pulse-program text was rejected; location is 1-based.
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn build(msg: impl Into<String>) -> Self {
        Error::Build(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }

    /// True for errors that reject bad input rather than report a failure
    /// encountered while computing. Used by callers to map exit codes.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Build(_) | Error::Config(_) | Error::Parse { .. }
        )
    }
}
