use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid coefficient field: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular integrand at cell {cell}: Γ(u) = 0 with Γ(u,v) ≠ 0 and p < 2 without regularization")]
    SingularIntegrand { cell: usize },

    #[error("non-finite value at cell {cell}: (Γ(u)+eps)^((p−2)/2) overflows")]
    Overflow { cell: usize },

    #[error("no Dirichlet nodes: the boundary mask is empty")]
    EmptyMask,

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("invalid condenser: {0}")]
    InvalidCondenser(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid contraction: {0}")]
    InvalidContraction(String),

    #[error("grid graph is disconnected: node {0} is unreachable")]
    Disconnected(usize),

    #[error("mapping analysis failed: {0}")]
    Mapping(String),

    #[error("linear solver failed: {0}")]
    LinearSolve(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
