//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered at t = {t:e} s")]
    NonFinite { t: f64 },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not a projector (max deviation {deviation:e})")]
    NotProjector { deviation: f64 },

    #[error("invalid time window: t0 = {t0:e}, t1 = {t1:e}, dt = {dt:e}")]
    InvalidTimes { t0: f64, t1: f64, dt: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t:e} s lies outside the pulse window [0, {duration:e}] s")]
    OutsidePulse { t: f64, duration: f64 },

    #[error("thermal truncation too small: tail mass {tail:e} beyond n_max = {n_max}")]
    TruncationTooSmall { tail: f64, n_max: usize },

    #[error("red/blue peak ratio {ratio} is not below 1; spectrum is not thermal")]
    UnphysicalRatio { ratio: f64 },

    #[error("labeled calibration set has no samples of class {0}")]
    MissingClass(&'static str),

    #[error("RB sequences need an even CZ count, got {0}")]
    OddSequenceLength(usize),

    #[error("decay fit failed: {0}")]
    FitFailure(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
