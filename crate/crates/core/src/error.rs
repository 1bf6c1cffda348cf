use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("circulant is singular: min |eigenvalue| {min_abs:e} <= tolerance {tol:e}")]
    SingularCirculant { min_abs: f64, tol: f64 },

    #[error("vertical lattice size {0} is odd; the blur shift needs an even order")]
    OddLattice(usize),

    #[error("innovation matrix of the conditional is numerically singular")]
    SingularInnovation,

    #[error("covariance eigenvalue {value:e} at index {index} is negative")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("constraint Gram matrix is numerically singular")]
    SingularConstraintGram,

    #[error("constrained coordinate {index} deviates from its fixed value by {deviation:e}")]
    ConstraintViolated { index: usize, deviation: f64 },

    #[error("ill-conditioned system in {0}")]
    IllConditioned(&'static str),

    #[error("image constraint mask is not a product of a row set and a column set")]
    MaskNotKronecker,

    #[error("variance parameter {name} must be positive, got {value}")]
    NonPositiveVariance { name: &'static str, value: f64 },

    #[error("inverse-gamma parameter {name} must be positive, got {value}")]
    NonPositiveScale { name: &'static str, value: f64 },

    #[error("the m x m block Y of the marginal covariance is not positive definite")]
    IndefiniteY,

    #[error("the m x m block S of the marginal covariance is not positive definite")]
    IndefiniteS,

    #[error("marginal workspace was built for a different blur vector")]
    StaleWorkspace,

    #[error("non-finite value in the leapfrog trajectory")]
    NonFiniteTrajectory,

    #[error("trace has zero variance")]
    DegenerateTrace,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
