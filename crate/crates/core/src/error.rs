use thiserror::Error;

/// Errors raised by the laboratory's constructors, solvers and checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("density has zero mass ({mass:e})")]
    ZeroMass { mass: f64 },

    #[error("inverse transform clipped {clipped:e} of mass (limit 1e-3)")]
    TruncationTooSevere { clipped: f64 },

    #[error("fixed point did not converge in {max_iter} iterations (residual {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error("spectral step rejected at t = {t}: |rho_hat| = {modulus}")]
    StepRejected { t: f64, modulus: f64 },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("centers of mass differ: {first} vs {second}")]
    CenterMismatch { first: f64, second: f64 },

    #[error("density is not strictly positive at cell {cell}")]
    NonPositiveDensity { cell: usize },

    #[error("series is not strictly positive on the fit window (index {index})")]
    NonPositiveSeries { index: usize },

    #[error("fit window holds {samples} samples, at least 10 required")]
    TooFewSamples { samples: usize },

    #[error("input must be strictly positive: {0}")]
    NonPositiveInput(&'static str),

    #[error("second derivative of the transport potential is not positive at sample {sample}")]
    NonConvexInput { sample: usize },

    #[error("invalid corpus member {index}: {reason}")]
    CorpusInvalid { index: usize, reason: String },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, message: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}
