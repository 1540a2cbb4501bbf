//! Error type shared by the numerical crates.

/// Argument and numerical-domain errors raised by the primitives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input that must be nonempty was empty.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Two inputs that must agree in length did not.
    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A matrix had the wrong shape for the operation.
    #[error("shape mismatch for {what}: expected {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    ShapeMismatch {
        what: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    /// A scalar argument fell outside its domain.
    #[error("domain error: {what} must be {requirement}, got {got}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        got: f64,
    },

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Input was structurally valid but degenerate for the operation
    /// (for example, every component excluded by the zero floor).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An optimization run failed; carries the epoch it failed in.
    #[error("training failed at epoch {epoch}: {what}")]
    Training { epoch: usize, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
