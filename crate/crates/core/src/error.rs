use thiserror::Error;

/// Errors raised by the geometry, ellipsoid, monitor and solver layers.
#[derive(Debug, Error)]
pub enum CapError {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (grid sizes, solver settings, problem files).
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments that belong to different grids or caps.
    #[error("usage error: {0}")]
    Usage(String),

    /// `(R, H)` does not lie in the open wedge `R/H > 2 cot(theta)`.
    #[error("(R, H) = ({r}, {h}) lies outside the wedge R/H > 2cot(theta) = {bound}")]
    Wedge { r: f64, h: f64, bound: f64 },

    /// The extents violate `H / R_in < tan(theta)`.
    #[error("extents are not those of a capillary convex body: H/R_in = {ratio} >= tan(theta) = {bound}")]
    NotCapillaryConvex { ratio: f64, bound: f64 },

    /// A hypothesis of an estimate or construction is not met by the input.
    #[error("applicability error: {0}")]
    Applicability(String),

    /// `b = hess h + h I` fails to be positive definite where it must be.
    #[error("convexity error: {0}")]
    Convexity(String),

    /// The monitor or solver does not apply to the requested exponent branch.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// The sparse Newton system could not be factorized.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CapError>;
