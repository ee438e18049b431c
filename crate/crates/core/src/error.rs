use std::path::PathBuf;

/// Errors raised anywhere in the simulator and experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("washout ({washout}) must be shorter than the driven sequence ({len})")]
    WashoutTooLong { washout: usize, len: usize },

    #[error("input has zero spread after masking; cannot calibrate range")]
    ZeroSpread,

    #[error("NARMA10 sequence diverged (|q| > {threshold}) at step {step} for input seed {seed}")]
    NarmaDiverged { seed: u64, step: usize, threshold: f64 },

    #[error("Mackey-Glass integration produced a non-finite state at t = {time}")]
    IntegrationFailure { time: f64 },

    #[error("normal equations are singular (ridge lambda = {lambda}); use a ridge lambda > 0")]
    SingularSystem { lambda: f64 },

    #[error("target has zero variance; NMSE is undefined")]
    UndefinedVariance,

    #[error("attenuation {db} dB is outside the mapped range [{lo}, {hi}] dB (known anchors: {anchors})")]
    UnmappedAttenuation {
        db: f64,
        lo: f64,
        hi: f64,
        anchors: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset format error: {0}")]
    DatasetFormat(String),

    #[error("incompatible result file {path}: {reason}")]
    IncompatibleResult { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configuration, parameters,
    /// file contents) as opposed to numerical or runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidParameter(_)
                | Error::EmptyInput(_)
                | Error::WashoutTooLong { .. }
                | Error::UnmappedAttenuation { .. }
                | Error::Config(_)
                | Error::DatasetFormat(_)
                | Error::IncompatibleResult { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
