use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("the measure is defined for c(0) = 1 only, got c(0) = {re} + {im}i")]
    UnsupportedInitialState { re: f64, im: f64 },

    #[error("invalid binning: {0}")]
    InvalidBinning(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no signal: total detrended power {total_power:e} below floor {floor:e}")]
    NoSignal { total_power: f64, floor: f64 },

    #[error("no Markovian points in the search domain")]
    EmptyRegion,

    #[error("unknown figure id {0} (expected 1, 2, 3 or 4)")]
    UnknownFigure(u32),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
