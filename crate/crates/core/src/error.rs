use thiserror::Error;

/// Errors raised by the echo canceller and its supporting tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AecError {
    /// A configuration value violates its documented range.
    #[error("configuration error: {0}")]
    Config(String),
    /// Shapes of inputs do not agree (bins, frames, vector lengths).
    #[error("structural error: {0}")]
    Structural(String),
    /// A numeric precondition failed (non-finite value, zero pivot, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The Hermitian solve failed even after regularization.
    #[error("solver error: {reason} (size {size})")]
    Solver { reason: String, size: usize },
    /// The first filter element is too small to normalize by.
    #[error("degenerate filter: |w[0]| = {magnitude:e}")]
    DegenerateFilter { magnitude: f64 },
    /// Input signals cannot be used as requested (e.g. zero power).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T, E = AecError> = std::result::Result<T, E>;
