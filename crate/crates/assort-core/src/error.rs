use thiserror::Error;

/// Errors surfaced by the library. Validation failures name the offending
/// field or quantity so callers can report them without re-deriving context.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("score out of range: max |theta_i| = {max_abs:.6} exceeds the bound {bound}")]
    ScoreOutOfRange { max_abs: f64, bound: f64 },

    #[error("refusing exhaustive enumeration for n = {n}; limit is {limit}")]
    EnumerationTooLarge { n: usize, limit: usize },

    #[error("infeasible gap targets: {0}")]
    InfeasibleTargets(String),

    #[error(
        "optimizer did not converge: {iters} iterations, gradient norm {grad_norm:.3e} (tol {tol:.1e})"
    )]
    NotConverged {
        iters: usize,
        grad_norm: f64,
        tol: f64,
        /// Last iterate, no-purchase coordinate first. Kept so callers can
        /// inspect or warm-start from the point of failure.
        last_iterate: Vec<f64>,
    },

    #[error("hessian is numerically singular (condition estimate {cond:.3e})")]
    SingularHessian { cond: f64 },

    #[error("nonpositive variance estimate for gap k = {k}")]
    DegenerateVariance { k: usize },

    #[error("dataset format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
