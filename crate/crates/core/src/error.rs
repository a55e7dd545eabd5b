use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} must have non-zero length")]
    ZeroVector { what: &'static str },

    #[error("magnetization solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("cannot label transitions: ms=0-like level is only {gap:e} MHz from another level")]
    AmbiguousLabeling { gap: f64 },

    #[error("calibration target {target} MHz/K unreachable; achieved maximum {achieved} MHz/K")]
    CalibrationUnreachable { target: f64, achieved: f64 },

    #[error("pulse sequence is not periodic: {0}")]
    NonPeriodic(String),

    #[error("thermal transient did not settle within {duration_s} s")]
    NotSettled { duration_s: f64 },

    #[error("sequence does not fit in t_r = {t_r_ns} ns (needs {required_ns} ns)")]
    SequenceOverflow { required_ns: f64, t_r_ns: f64 },

    #[error("found {} dip(s) at {detections:?} MHz but {expected} were requested", detections.len())]
    TooFewDips { expected: usize, detections: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("working-point responsivity {value:.3e} /MHz is below {threshold:.3e} /MHz; recalibrate drive detuning or evolution time")]
    WeakResponsivity { value: f64, threshold: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
