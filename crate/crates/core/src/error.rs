use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A fit precondition on the observation design failed.
    #[error("fit precondition violated: {0}")]
    Precondition(String),

    #[error("objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("Hessian is numerically singular; fit is not identified")]
    SingularHessian,

    #[error("singular design matrix in regression")]
    SingularDesign,

    #[error("mask constraints unsatisfiable after {attempts} attempts: {reason}")]
    MaskGeneration { attempts: usize, reason: String },

    #[error("seed {seed_index}: {source}")]
    Seed {
        seed_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
