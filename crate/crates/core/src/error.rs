use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate trend label: series value is zero at segment start t={time}")]
    DegenerateLabel { time: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("training failed at epoch {epoch}: {reason}")]
    TrainingFailed {
        epoch: usize,
        reason: String,
        epoch_losses: Vec<f64>,
    },

    #[error("rank deficient design matrix, collinear columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
