use thiserror::Error;

pub type Result<T, E = EitError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EitError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh generation failed: {0}")]
    Mesh(String),

    #[error("parameter {theta:?} lies outside the admissible box [{lower}, {upper}]^D")]
    OutsideParameterSpace { theta: Vec<f64>, lower: f64, upper: f64 },

    #[error("parameter {theta:?} is on the boundary of the admissible box; an interior point is required")]
    BoundaryParameter { theta: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("information matrix is ill-conditioned (min eigenvalue {min_eigenvalue:e})")]
    Conditioning { min_eigenvalue: f64 },
}

impl EitError {
    /// True for failures of the numerical pipeline itself (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, EitError::Factorization(_) | EitError::Conditioning { .. })
    }
}
