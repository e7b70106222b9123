use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument within {distance:e} of a lattice point (pole guard {guard:e})")]
    PoleProximity { distance: f64, guard: f64 },

    #[error("series not converged after {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel nearly vanishes: |K| = {modulus:e} below floor {floor:e}")]
    NearZeroKernel { modulus: f64, floor: f64 },

    #[error("singular metric: |det G| = {modulus:e} below {threshold:e}")]
    SingularMetric { modulus: f64, threshold: f64 },

    #[error("metric is not positive definite")]
    NotPositiveDefinite,

    #[error("ill-conditioned Gram matrix (condition estimate {condition:e})")]
    IllConditionedGram { condition: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("annulus sign pattern violated: {0}")]
    SignPattern(String),

    #[error("no path between the endpoints on the grid graph")]
    Unreachable,

    #[error("sampling failed: {failed} of {total} samples rejected")]
    SamplingFailed { failed: usize, total: usize },

    #[error("iteration did not converge: {0}")]
    NotConverged(String),
}
