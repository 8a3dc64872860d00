use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation at {location}: value {value} outside [-{radius}, {radius}]")]
    DomainViolation {
        location: String,
        value: f64,
        radius: f64,
    },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("least-squares system ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("node {0} is affine and is never fitted")]
    AffineNode(usize),
    #[error("calibration failed: {0}")]
    CalibrationFailure(String),
    #[error("cost is not quadratic: {0}")]
    NotQuadratic(String),
    #[error("no convergence after {iters} iterations (gradient norm {grad_norm:.3e})")]
    NoConvergence { iters: usize, grad_norm: f64 },
    #[error("plan infeasible: {0}")]
    PlanInfeasible(String),
    #[error("surrogate too coarse: measured error {measured:.3e} exceeds target {target:.3e}")]
    SurrogateTooCoarse { measured: f64, target: f64 },
    #[error("iterate escaped the 3-gamma ball: distance {distance:.3e} > {limit:.3e}")]
    IterateEscaped { distance: f64, limit: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(location: impl Into<String>, value: f64, radius: f64) -> Self {
        Error::DomainViolation {
            location: location.into(),
            value,
            radius,
        }
    }
}
