use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("finite-difference oracle failed: non-finite value at {0}")]
    OracleFailure(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("symmetricity is undefined for the zero matrix")]
    UndefinedMetric,

    #[error("precondition failed: commutator norm {commutator_norm:.3e} exceeds tolerance {tolerance:.1e}")]
    Commutator { commutator_norm: f64, tolerance: f64 },

    #[error("cannot project weight column {column}: zero norm")]
    ZeroNormColumn { column: usize },

    #[error("IDX format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
