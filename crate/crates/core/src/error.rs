use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("variable x{index} out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("domain error in `{node}`: {msg}")]
    Domain { node: String, msg: String },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular shift: smallest singular value of I + delta*H is {sigma_min:e}")]
    SingularShift { sigma_min: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gradient vanished at {point:?} (norm {norm:e})")]
    VanishingGradient { point: Vec<f64>, norm: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("foot point is a saddle of the distance (reduced Hessian eigenvalue {min_eig:e})")]
    Saddle { min_eig: f64 },

    #[error("|delta| = {delta:e} exceeds the collar radius {collar:e}")]
    OutsideCollar { delta: f64, collar: f64 },

    #[error("boundary not found in region: {found} of {wanted} points after {attempts} attempts")]
    BoundaryNotFound {
        found: usize,
        wanted: usize,
        attempts: usize,
    },

    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),

    #[error("verification failed: {0}")]
    Verification(String),
}
