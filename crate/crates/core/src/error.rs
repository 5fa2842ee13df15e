use thiserror::Error;

/// Errors raised by the model, boundary, outcome and value computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    /// `r <= gamma*mu + gamma*(gamma-1)*sigma^2/2`: equilibrium values are infinite.
    #[error(
        "integrability condition r > gamma*mu + gamma*(gamma-1)*sigma^2/2 violated: r = {r}, mu_gamma = {mu_gamma}"
    )]
    Integrability { r: f64, mu_gamma: f64 },

    #[error("inverse demand evaluated at zero total capacity ({0})")]
    DomainZeroCapacity(f64),

    #[error("capital {q} below the admissible floor {floor}")]
    DomainBelowFloor { q: f64, floor: f64 },

    #[error("boundary kind mismatch: {0}")]
    KindMismatch(String),

    #[error("invalid aggregate split: {0}")]
    InvalidSplit(String),

    #[error(
        "quadrature did not converge: estimated error {estimate:e} above tolerance {tolerance:e}"
    )]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    #[error("finite-difference stencil straddles the investment boundary at x = {x}")]
    TooCloseToBoundary { x: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
