use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} sites vs {right} sites")]
    Dimension { left: usize, right: usize },

    #[error("{sites} sites exceeds the dense cap of {cap}")]
    DenseCap { sites: usize, cap: usize },

    #[error("operator is not hermitian (max anti-hermitian part {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("legendre order {order} exceeds supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("truncation order {0} not supported (expected 1, 3 or 5)")]
    UnsupportedTruncation(usize),

    #[error("eigenphase {phase:.6} of the window propagator is too close to the log branch cut; shrink dt")]
    Branch { phase: f64 },

    #[error("exact evolution did not converge within {max_substeps} substeps (last change {last_change:e})")]
    NoConvergence { max_substeps: usize, last_change: f64 },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(&'static str),

    #[error("controller froze at dt_min = {dt_min} (t = {t})")]
    FreezeHalt { t: f64, dt_min: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures of the numerical machinery (branch cut, non-convergence).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Branch { .. } | Error::NoConvergence { .. } | Error::Decomposition(_) | Error::NotHermitian { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
