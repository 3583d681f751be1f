use thiserror::Error;

/// Errors produced by the solvers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not match grid: {0}")]
    FieldMismatch(String),

    #[error("non-finite value {value} at cell {cell}")]
    NonFinite { cell: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel evaluated at its singular point x = 0")]
    Singular,

    #[error("negative density {value:e} at cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("energy blow-up at t = {t}: H = {current:e} exceeds 1e3 * H(0) = {initial:e}")]
    EnergyBlowup { t: f64, current: f64, initial: f64 },

    #[error("reference density not bounded away from zero: min = {min:e} at t = {t}")]
    NotBoundedAway { min: f64, t: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
