use thiserror::Error;

/// Errors raised by the simulator, analysis routines and configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty time grid")]
    EmptyGrid,

    #[error("time grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),

    #[error("noise trajectory does not match the step grid: {0}")]
    TrajectoryMismatch(String),

    #[error("tau ({tau:e} s) must exceed the pi-pulse duration ({pi:e} s)")]
    TauTooShort { tau: f64, pi: f64 },

    #[error("reference state is not pure (purity {0})")]
    NotPure(f64),

    #[error("R^2 is undefined for constant data")]
    ConstantData,

    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("all {0} fit restarts failed")]
    AllRestartsFailed(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_finite(value: f64, name: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
