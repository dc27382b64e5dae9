use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// Variants fall into two families: configuration problems (bad input,
/// reported before any numerics run) and numerical failures (quadrature,
/// root tracking, Newton). [`Error::is_config`] tells them apart, which the
/// CLI uses to pick an exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("angles must be strictly increasing inside (0, 2π/3): {0}")]
    OrderingViolation(String),
    #[error("angle gap margin violated: {0}")]
    AngleCollision(String),
    #[error("|t_{index}| = {value} is not below t_max = {t_max}")]
    TooLargeT {
        index: usize,
        value: f64,
        t_max: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("Lagrangian mode needs an even genus g = 2p with p ≥ 1: {0}")]
    BadHalfGenus(String),
    #[error("evaluation point too close to the polar divisor: {0}")]
    MarginViolation(String),
    #[error("node pair is singular at θ_mj = {theta_mj}: {reason}")]
    SingularPair { theta_mj: f64, reason: String },
    #[error("pole proximity in the analytic extension: {0}")]
    PoleProximity(String),
    #[error("degenerate plane: {0}")]
    DegeneratePlane(String),
    #[error("A and B blocks are not diagonal (off-diagonal magnitude {0:e})")]
    NonDiagonalBlocks(f64),
    #[error("vanishing pair of branch points not cleanly separated: {0}")]
    RootSeparationFailure(String),
    #[error("root continuation lost track: {0}")]
    TrackingLoss(String),
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureDivergence { tol: f64, estimate: f64 },
    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("iterate left the trust region: {0}")]
    LeftTrustRegion(String),
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("certification failed: residual grew from {before:e} to {after:e}")]
    CertificationFailed { before: f64, after: f64 },
}

impl Error {
    /// True for errors caused by invalid input rather than numerical trouble.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::OrderingViolation(_)
                | Error::AngleCollision(_)
                | Error::TooLargeT { .. }
                | Error::InvalidConfig(_)
                | Error::BadHalfGenus(_)
                | Error::MarginViolation(_)
                | Error::ModelUnavailable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
