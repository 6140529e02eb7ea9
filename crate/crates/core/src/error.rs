//! Error type shared across the crate.

/// Errors raised by numerical and statistical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KbmError {
    /// A 3x3 matrix fell below the relative eigenvalue floor and cannot be
    /// inverted reliably. Carries the offending eigenvalue and the floor.
    #[error("matrix numerically singular: min eigenvalue {min_eigenvalue:.3e} below floor {floor:.3e}")]
    SingularMatrix { min_eigenvalue: f64, floor: f64 },

    /// An argument was outside the documented domain of an operation.
    #[error("domain violation: {0}")]
    Domain(String),

    /// A statistics reducer received no samples.
    #[error("empty statistics stream")]
    EmptyStream,

    /// Adaptive quadrature stopped before reaching the requested tolerance.
    #[error("quadrature did not converge: achieved tolerance {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    /// A rate fit was requested on data it cannot support (too few points,
    /// nonpositive statistics, or a degenerate regression).
    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    /// Too many per-path matrix inversions failed inside a Monte Carlo run.
    #[error("singular-path rate too high: {failures} of {total} replicates")]
    TooManySingularPaths { failures: u64, total: u64 },
}

pub type Result<T> = std::result::Result<T, KbmError>;
