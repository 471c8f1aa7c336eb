use thiserror::Error;

/// Errors produced anywhere in the decomposition pipeline.
#[derive(Debug, Error)]
pub enum TmvError {
    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("invalid mode specification: {0}")]
    InvalidMode(String),

    #[error("invalid parameter vector: {0}")]
    InvalidTheta(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("custom warp derivative for `{mode}` disagrees with finite differences at p={param}, t={t}: analytic {analytic}, numeric {numeric}")]
    InvalidDerivative {
        mode: String,
        param: f64,
        t: f64,
        analytic: f64,
        numeric: f64,
    },

    #[error("quadrature did not converge on [{a}, {b}] within depth {max_depth}")]
    NonConvergent { a: f64, b: f64, max_depth: u32 },

    #[error("mode `{mode}` is not separable: {detail}")]
    NotSeparable { mode: String, detail: String },

    #[error("blocks of {size} coupled modes are not supported (maximum is 2)")]
    UnsupportedBlockSize { size: usize },

    #[error("arc-coordinate map is not invertible near coordinate {coordinate}")]
    NonInvertible { coordinate: f64 },

    #[error("Fréchet mean search hit the search-box boundary at {theta:?}")]
    SearchBoxTooSmall { theta: Vec<f64> },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("fit did not converge after {iterations} outer iterations (best weighted SSE {best_sse})")]
    FitNotConverged {
        iterations: usize,
        best_sse: f64,
        best: Box<crate::fitting::FitResult>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bootstrap aborted: {failures} of {replicates} replicates failed")]
    BootstrapAborted { failures: usize, replicates: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TmvError>;
