use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are split into validation failures (bad input, bad config) and
/// runtime failures (numerics that did not work out); the CLI maps the former
/// to exit code 2 and the latter to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor is not symmetric: max asymmetry {max_asym:.3e}")]
    NotSymmetric { max_asym: f64 },

    #[error("matrix is not SPD: eigenvalue #{index} = {value:.6e} (threshold {threshold:.3e})")]
    NotSpd { index: usize, value: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}")]
    BadDim(usize),

    #[error("matrix is not a proper rotation: orthogonality residual {orth:.3e}, det {det:.6}")]
    NotRotation { orth: f64, det: f64 },

    #[error("rotation logarithm at branch boundary: plane angle {angle:.12} rad")]
    BranchBoundary { angle: f64 },

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ensemble dispersion too large: max angle {angle:.4} rad from the mean (limit {limit:.4})")]
    Dispersion { angle: f64, limit: f64 },

    #[error("covariance is not positive semidefinite: eigenvalue {value:.3e}")]
    NotPsd { value: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric { .. }
                | Error::NotSpd { .. }
                | Error::DimMismatch { .. }
                | Error::BadDim(_)
                | Error::NotRotation { .. }
                | Error::NotPsd { .. }
                | Error::Invalid(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
