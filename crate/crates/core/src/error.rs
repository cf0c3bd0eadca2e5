use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid wavespeed profile: {0}")]
    Profile(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("function does not vanish on the boundary layer (node {0})")]
    BoundarySupport(usize),
    #[error("support reaches the grid boundary: {0}")]
    Support(String),
    #[error("spectral parameter {0} lies on the branch cut or at the origin")]
    BranchCut(crate::Complex64),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("mask nesting violated: {0}")]
    Nesting(String),
    #[error("iteration did not converge after {iterations} iterations (estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("Neumann series requested with ‖K(λ)χ‖ = {0} ≥ 1/2")]
    NeumannRegime(f64),
    #[error("quadrature produced a non-finite value at λ = {0}")]
    Quadrature(crate::Complex64),
    #[error("insufficient samples: need {need}, got {got}")]
    Samples { need: usize, got: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
