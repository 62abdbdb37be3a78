//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid step {step} MHz under-resolves the hole linewidth {fwhm} MHz (max {max} MHz)")]
    UnderResolvedGrid { step: f64, fwhm: f64, max: f64 },

    #[error("frequency {freq} MHz lies outside the grid [{min}, {max}] MHz")]
    OutOfGrid { freq: f64, min: f64, max: f64 },

    #[error("echo of order {order} at {time_ns} ns wraps past the {window_ns} ns time window")]
    EchoAliasing {
        order: usize,
        time_ns: f64,
        window_ns: f64,
    },

    #[error("window {index} at {center_mhz} MHz is unreachable: {reason}")]
    UnreachableWindow {
        index: usize,
        center_mhz: f64,
        reason: String,
    },

    #[error("sweep [{start_mhz}, {stop_mhz}] MHz exceeds the AOM range of ±{limit_mhz} MHz")]
    SweepOutOfRange {
        start_mhz: f64,
        stop_mhz: f64,
        limit_mhz: f64,
    },

    #[error("empty range: {0}")]
    EmptyRange(String),

    #[error("malformed schedule: {0}")]
    MalformedSchedule(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
