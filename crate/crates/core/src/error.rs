use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} must be > 0 (got {value})")]
    InvalidParameter { field: &'static str, value: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    /// Adaptive quadrature could not reach its tolerance before hitting the
    /// depth limit. Carries the panel with the largest error estimate.
    #[error("quadrature failed on panel [{lo}, {hi}] (error estimate {error})")]
    QuadratureFailure { lo: f64, hi: f64, error: f64 },

    /// The decreasing function is already non-positive at the lower end of
    /// the bracket. Callers map this to the Y = 0 / H = 0 boundary.
    #[error("root at or below lower bracket end {lo} (g = {value})")]
    RootAtOrBelowLower { lo: f64, value: f64 },

    #[error("no root in bracket: g({hi}) = {value} > 0")]
    NoRootInBracket { hi: f64, value: f64 },

    #[error("root finder did not converge in {iterations} iterations (bracket [{lo}, {hi}])")]
    RootNotConverged { lo: f64, hi: f64, iterations: usize },

    #[error("non-finite function value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("bracket expansion failed: {0}")]
    BracketExpansion(String),

    #[error(
        "critical field exceeds domain cap at T = {t} (F(T, H_max, 0) = {value} > 0); raise T0"
    )]
    CriticalFieldAboveCap { t: f64, value: f64 },

    #[error("singular derivative: dF/dY = {0}")]
    SingularDerivative(f64),

    #[error("density of states: {0}")]
    Dos(String),

    #[error("sweep: {0}")]
    Sweep(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
