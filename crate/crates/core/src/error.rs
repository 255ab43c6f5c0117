use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: min eigenvalue {min_eigenvalue:e} < tolerance {tolerance:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not positive semi-definite: min eigenvalue {min_eigenvalue:e} < -{tolerance:e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("immersion is degenerate at node {node} (parameters {params:?}): smallest singular value {sigma_min:e}")]
    DegenerateImmersion {
        node: usize,
        params: Vec<f64>,
        sigma_min: f64,
    },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("tensor field is not uniformly positive: min eigenvalue of g^-1 A is {min_eigenvalue:e} at node {node}")]
    NotUniformlyPositive { node: usize, min_eigenvalue: f64 },

    #[error("intrinsic dimension {0} is not supported (need n >= 2)")]
    UnsupportedDimension(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid constant arguments n={n}, m={m}: {reason}")]
    InvalidConstant { n: usize, m: usize, reason: String },

    #[error("scenario validation failed: {0}")]
    InvalidScenario(String),

    #[error("non-positive functional: {0}")]
    NonPositiveFunctional(String),

    #[error("potential is not convex at node {node}: min Hessian eigenvalue {min_eigenvalue:e}")]
    NonConvexPotential { node: usize, min_eigenvalue: f64 },

    #[error("chart is not flat: sup |II| = {sup_ii:e}")]
    CurvedChart { sup_ii: f64 },

    #[error("Neumann compatibility violated: interior source {interior:e} vs boundary flux {boundary:e}")]
    Incompatible { interior: f64, boundary: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
