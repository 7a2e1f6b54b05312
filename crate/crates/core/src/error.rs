use std::path::PathBuf;

use thiserror::Error;

use crate::model::TaskLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} outside range [{min}, {max}]")]
    OutOfRange { value: i64, min: i64, max: i64 },

    #[error("session has {available} samples per channel, one trial needs {required}")]
    SessionTooShort { available: usize, required: usize },

    #[error("trial duration {0} s outside [3, 5]")]
    InvalidTrialDuration(f64),

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("unknown task label `{0}`")]
    UnknownTask(String),

    #[error("unknown device `{0}`")]
    UnknownDevice(String),

    #[error("sampling rate mismatch: {0}")]
    SampleRateMismatch(String),

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("trial of {samples} samples is too short for spectral resolution; need at least {required}")]
    Resolution { samples: usize, required: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("decomposition level {requested} exceeds maximum {max} for length {len}")]
    LevelTooDeep { requested: usize, max: usize, len: usize },

    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),

    #[error("distraction index undefined: {band} power is {value}")]
    UndefinedIndex { band: &'static str, value: f64 },

    #[error("tasks without trials: {0:?}")]
    MissingTasks(Vec<TaskLabel>),

    #[error("training data invalid: {0}")]
    Training(String),

    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller learning rate")]
    Divergence { epoch: usize },

    #[error("stratification infeasible: class `{class}` has {count} instances for {folds} folds")]
    Stratification {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("degenerate test input: {0}")]
    Degenerate(String),

    #[error("sample at t={t} precedes previous sample at t={previous}")]
    OutOfOrder { t: f64, previous: f64 },

    #[error("calibration failed: no threshold beats alerting on every window (best F1 {best_f1:.4})")]
    CalibrationFailed { best_f1: f64 },

    #[error("{clipped} of {total} samples clip the ADC range")]
    Clipping { clipped: usize, total: usize },
}

impl Error {
    /// Short machine-readable kind, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::SessionTooShort { .. } => "session_too_short",
            Error::InvalidTrialDuration(_) => "invalid_trial_duration",
            Error::InvalidSession(_) => "invalid_session",
            Error::UnknownTask(_) => "unknown_task",
            Error::UnknownDevice(_) => "unknown_device",
            Error::SampleRateMismatch(_) => "fs_mismatch",
            Error::MissingColumn(_) => "missing_column",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Schema(_) => "schema",
            Error::Resolution { .. } => "resolution",
            Error::Parameter(_) => "parameter",
            Error::LevelTooDeep { .. } => "level_too_deep",
            Error::ChannelMismatch(_) => "channel_mismatch",
            Error::UndefinedIndex { .. } => "undefined_index",
            Error::MissingTasks(_) => "missing_tasks",
            Error::Training(_) => "training",
            Error::Dimension { .. } => "dimension",
            Error::Divergence { .. } => "divergence",
            Error::Stratification { .. } => "stratification",
            Error::Degenerate(_) => "degenerate",
            Error::OutOfOrder { .. } => "out_of_order",
            Error::CalibrationFailed { .. } => "calibration_failed",
            Error::Clipping { .. } => "clipping",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
