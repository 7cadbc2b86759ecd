use thiserror::Error;

/// Crate-wide error type. Every fallible operation reports one of these;
/// numerical results are never silently substituted on failure.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid lattice geometry: {0}")]
    InvalidLattice(String),

    #[error("operands live on different lattice boxes")]
    BoxMismatch,

    #[error("site vector has empty support")]
    EmptySupport,

    #[error(
        "box half-width {actual} too small: moment order {order} with support radius \
         {support_radius} needs half-width >= {required}"
    )]
    BoxTooSmall {
        actual: i64,
        required: i64,
        support_radius: i64,
        order: u32,
    },

    #[error("dense diagonalization refused: {sites} sites exceeds limit {limit}")]
    OracleLimit { sites: usize, limit: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value outside the function's domain: {0}")]
    Domain(String),

    #[error("integrand is not known to be integrable over an unbounded interval: {0}")]
    NonIntegrable(String),

    #[error(
        "quadrature failed to reach requested accuracy: value {value:.6e}, \
         error estimate {error_estimate:.6e}"
    )]
    QuadratureAccuracy { value: f64, error_estimate: f64 },

    #[error("eigendecomposition validation failed: {0}")]
    EigenValidation(String),

    #[error("spectral enclosure violated: {0}")]
    EnclosureViolation(String),

    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
