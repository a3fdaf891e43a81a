use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NvError {
    #[error("spectral parameter must be nonzero")]
    InvalidSpectralPoint,
    #[error("phase evaluated at the origin")]
    PoleAtOrigin,
    #[error("non-finite sample at node {index}")]
    NonFiniteSample { index: usize },
    #[error("region classification is ambiguous, root moduli {moduli:?}")]
    AmbiguousClassification { moduli: [f64; 3] },
    #[error("Neumann iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("epsilon {eps:.3e} is below two grid spacings ({spacing:.3e})")]
    EpsilonTooSmall { eps: f64, spacing: f64 },
    #[error("stationary point coincides with a grid node")]
    StationaryPointOnGridNode,
    #[error("window too small: boundary/max ratio {ratio:.3e}")]
    WindowTooSmall { ratio: f64 },
    #[error("{failed} of {total} lattice points failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("argmax {argmax} lies on the window boundary")]
    WindowBoundary { argmax: String },
    #[error("need at least {needed} entries, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("resolution {nodes} nodes exceeds the budget of {budget}")]
    ResolutionBudget { nodes: usize, budget: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

impl NvError {
    /// Numerical failures map to exit code 3, everything else is a configuration problem.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, NvError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, NvError>;
