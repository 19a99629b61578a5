use std::path::PathBuf;

/// Errors produced by the attitude-control library and harness.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate quaternion (norm {norm:e})")]
    DegenerateQuaternion { norm: f64 },

    #[error("numerical blowup at t = {t} s")]
    NumericalBlowup { t: f64 },

    #[error("inconsistent reference: scalar part of 2 qd^-1 * qd_dot is {scalar:e}")]
    InconsistentReference { scalar: f64 },

    #[error("invalid maneuver profile: {0}")]
    InvalidProfile(String),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("metric window [{t0}, {tf}] is not inside the log span [{start}, {end}]")]
    InvalidWindow {
        t0: f64,
        tf: f64,
        start: f64,
        end: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics of a run rather than its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. }
                | Error::DegenerateQuaternion { .. }
                | Error::InconsistentReference { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
