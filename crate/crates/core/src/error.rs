use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("theory-inapplicable: {0}")]
    TheoryInapplicable(String),

    #[error("reserve prices required for theorem constants (good {0} has r = 0)")]
    MissingReserve(usize),

    #[error("equilibrium solver did not converge: best residual {best_residual:e} after {iterations} sweeps")]
    NonConvergence { best_residual: f64, iterations: usize },

    #[error("unknown scenario `{0}` (expected example1, large-linear or random-ces)")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
