use thiserror::Error;

/// Errors raised across geometry, assembly, solver and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or a violated geometric inequality.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its domain of definition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular block in factorization at slab {slab} (condition estimate {cond:.3e})")]
    Singular { slab: usize, cond: f64 },

    #[error("solver quality: relative residual {residual:.3e} exceeds {limit:.1e}")]
    SolverQuality { residual: f64, limit: f64 },

    #[error(
        "eigen iteration did not converge after {iterations} iterations \
         (last Rayleigh quotient {rayleigh:.6e}, residual {residual:.3e})"
    )]
    EigenNoConvergence {
        iterations: usize,
        rayleigh: f64,
        residual: f64,
    },

    /// The trace space has a nonzero element vanishing on the boundary set reachable from the data.
    #[error("trace space violates injectivity on Gamma (A1): margin {margin:.3e} <= tol {tol:.1e}")]
    TraceInjectivity { margin: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Json(_) | Error::TraceInjectivity { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
