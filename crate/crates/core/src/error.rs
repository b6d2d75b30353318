//! Error types for the numerical core.

use thiserror::Error;

/// Domain errors raised by geometry, operator assembly and solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// The Fourier series produced a non-positive cylindrical radius; the
    /// surface does not wind around the axis at this grid point.
    #[error("non-positive cylindrical radius R({u:.6},{v:.6}) = {r:.6e}")]
    NonPositiveRadius { u: f64, v: f64, r: f64 },

    /// `|d_u psi x d_v psi|` vanished: the parametrization is singular.
    #[error("degenerate embedding: area element {area:.6e} at (u,v)=({u:.6},{v:.6})")]
    DegenerateEmbedding { u: f64, v: f64, area: f64 },

    /// The current-norm Gram matrix is not positive definite.
    #[error("current-norm Gram matrix is not positive definite (degenerate mesh or truncation)")]
    SingularGram,

    /// Kernel evaluation at (nearly) coincident points.
    #[error("Biot-Savart kernel evaluated at coincident points: |x-y| = {dist:.3e} < {guard:.3e}")]
    CoincidentPoints { dist: f64, guard: f64 },

    /// An evaluation point violates the surface separation guard.
    #[error("evaluation point too close to source surface: distance {dist:.6e} < guard {guard:.6e}")]
    TooCloseToSurface { dist: f64, guard: f64 },

    /// The regularized normal equations could not be factorized.
    #[error("normal equations not SPD-factorizable (lambda too small for this truncation/grid?)")]
    IllConditioned,

    /// Shape-gradient evaluation on a non-stationary inner solve.
    #[error("inner solve not stationary: optimality residual {residual:.3e} exceeds {tol:.3e}")]
    NotStationary { residual: f64, tol: f64 },

    /// Finite-difference verification failed.
    #[error(
        "gradient check failed: max relative error {max_rel:.3e} > {tol:.3e} \
         (worst direction: {worst})"
    )]
    ToleranceExceeded {
        max_rel: f64,
        tol: f64,
        worst: String,
    },

    /// Line search could not produce an acceptable step.
    #[error("line search failed at iteration {iter}: {reason}")]
    LineSearchFailed { iter: usize, reason: String },

    /// A trial surface in the optimizer could not be meshed.
    #[error("inadmissible iterate: {0}")]
    InadmissibleIterate(Box<CoreError>),

    /// Dimension mismatch between operator, Gram and target blocks.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
