use thiserror::Error;

/// Errors raised by the recovery library.
#[derive(Debug, Error)]
pub enum UsfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel support [{lo}, {hi}] s exceeds the window of {window} s")]
    SupportExceedsWindow { lo: f64, hi: f64, window: f64 },

    #[error("truncation violated: max delay plus support width {required} s must be below N*T = {available} s")]
    TruncationViolation { required: f64, available: f64 },

    #[error("sequence too short: length {len}, need more than {needed}")]
    SequenceTooShort { len: usize, needed: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("kernel spectrum below floor at index {index}")]
    KernelSpectrumFloor { index: usize },

    #[error("denominator vanishes at evaluation node {index}")]
    PoleOnNode { index: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl UsfError {
    /// True for failures caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            UsfError::KernelSpectrumFloor { .. }
                | UsfError::PoleOnNode { .. }
                | UsfError::Singular(_)
                | UsfError::Degenerate(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        UsfError::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, UsfError>;
