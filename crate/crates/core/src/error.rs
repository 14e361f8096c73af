use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible exponent system: {0}")]
    Infeasible(String),
    #[error("resolution rule violated: {0}")]
    Resolution(String),
    #[error("stencil needs a collar of {needed} cells, field has {available}")]
    Collar { needed: usize, available: usize },
    #[error("kernel support does not fit: {0}")]
    Support(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownSolution(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("positive definiteness lost: {0}")]
    PdLoss(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("domain mismatch: {0}")]
    Mismatch(String),
    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::Level {
            level,
            source: alloc::boxed::Box::new(self),
        }
    }
}
