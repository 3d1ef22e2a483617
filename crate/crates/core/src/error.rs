use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("frame metric is not positive definite")]
    NotPositiveDefinite,

    #[error("geodesic speed drift {drift:e} exceeds {limit:e}; reduce the step size")]
    StepRejected { drift: f64, limit: f64 },

    #[error("mesh too coarse: sphere area changed by {rel_change:e} under one refinement")]
    MeshTooCoarse { rel_change: f64 },

    #[error("degenerate induced metric at node ({i}, {j}): condition number {condition:e}")]
    DegenerateMetric { i: usize, j: usize, condition: f64 },

    #[error("quadrature failed: refinement did not reduce the discrepancy ({coarse:e} -> {fine:e})")]
    QuadratureFailure { coarse: f64, fine: f64 },

    #[error("end volume is infinite: trace(A) = {0} must be positive")]
    InfiniteVolume(f64),

    #[error("projected right-hand side is not orthogonal to the kernel (inner product {0:e})")]
    SingularSolve(f64),

    #[error("Newton iteration did not converge after {steps} steps (residual {residual:e})")]
    NoConvergence { steps: usize, residual: f64 },

    #[error("near-kernel dimension of the linearization is {0}, expected 1")]
    KernelCollapse(usize),
}

impl Error {
    /// Input-validation failures, as opposed to numerical breakdowns.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Unsupported(_) | Error::NotPositiveDefinite
        )
    }
}
