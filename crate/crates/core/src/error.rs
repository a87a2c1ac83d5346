use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pre- and post-selected states are (numerically) orthogonal: |overlap| = {overlap:e}")]
    VanishingOverlap { overlap: f64 },
    #[error("basis is not complete and orthonormal (deviation {deviation:e})")]
    IncompleteBasis { deviation: f64 },
    #[error("operator invariant violated: {0}")]
    InvalidOperator(String),
    #[error("state normalization violated: norm^2 = {norm_sqr}")]
    InvalidState { norm_sqr: f64 },
    #[error("ODE step control failed to converge at t = {t} (step {step:e})")]
    NonConvergence { t: f64, step: f64 },
    #[error("evolution element ({row}, {col}) is not available in closed form")]
    UnsupportedElement { row: i64, col: i64 },
    #[error("degenerate time window: t_i = t_f = {0}")]
    DegenerateWindow(f64),
    #[error("invalid time window: need t_i <= t <= t_f, got ({t_i}, {t}, {t_f})")]
    InvalidWindow { t_i: f64, t: f64, t_f: f64 },
    #[error("interaction count {given} inconsistent with time {t} (expected {expected})")]
    InvalidInteractionCount { given: usize, expected: usize, t: f64 },
    #[error("invalid sweet-spot indices (n={n}, m={m}, N={big_n}, M={big_m})")]
    InvalidIndices { n: usize, m: usize, big_n: usize, big_m: usize },
    #[error("coordinate x = {x} outside the region of this formula")]
    OutOfRegion { x: f64 },
    #[error("post-selection time T = {t_units} L/v is not of the form (4i+2) L/v with i >= 1")]
    InvalidPostselectionTime { t_units: f64 },
    #[error("quadrature failed: relative error estimate {estimate:e}")]
    QuadratureFailure { estimate: f64 },
    #[error("grid invariant violated: {0}")]
    StabilityViolation(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
