use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// Backward Euler step matrix would stop being an M-matrix.
    #[error(
        "positivity guard violated: da * max(0, -min h) = {product:.6e} >= 1 \
         (da = {da:.6e}, min h = {min_coeff:.6e}); refine the age grid to da < {da_bound:.6e}"
    )]
    PositivityGuard {
        da: f64,
        min_coeff: f64,
        product: f64,
        da_bound: f64,
    },

    #[error("diffusion coefficient floor violated: min(1 + gamma*v) = {min:.6e} < {floor:.6e}")]
    CoefficientFloor { min: f64, floor: f64 },

    #[error("per-step Newton diverged at age step {step} after {iterations} iterations (residual {residual:.3e})")]
    StepNewton {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("Newton solve failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    /// Semi-trivial walk failed with the newborn amplitude beyond what the
    /// age step resolves.
    #[error(
        "semi-trivial branch unresolved at parameter {param}: da * max trace = {product:.3e} \
         (last converged at {reached}); refine the age grid"
    )]
    Unresolved { param: f64, reached: f64, product: f64 },

    #[error("no positive solution for parameter {param} <= 1")]
    NoPositiveSolution { param: f64 },

    #[error("power iteration did not converge in {iterations} iterations (last change {residual:.3e})")]
    PowerIteration { iterations: usize, residual: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no bifurcation: {0}")]
    NoBifurcation(String),

    #[error("branch below one lost convergence at eta = {reached}")]
    ExtensionFailed { reached: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
