//! The control problem, the Malliavin matrix computed two independent ways,
//! the explicit Malliavin dual with a basis-truncated oracle, and samplers
//! for the large-time limit objects.
//!
//! Conventions used throughout this module:
//!
//! - Control functions and the Gram matrix are attached to a base angle `u`;
//!   the angle-0 objects are related by the block rotation `1 (+) R(u)`.
//! - The explicit dual is evaluated at base angle 0 from driver-only
//!   integrals and stores a weight row; the rotation and the direction are
//!   applied when a scalar dual value is requested.
//! - Every Lebesgue integral is a trapezoid sum on the driver's grid and
//!   every stochastic integral a left-point sum on the same grid, matching
//!   the rest of the crate.

mod basis;
mod dual;
mod limit;
mod linalg;
mod matrix;

pub use basis::{
    basis_columns, basis_coefficients, dual_basis_truncated, gram_from_columns, kl_basis_derivative,
    BasisColumns, TruncatedDual, DEFAULT_FD_STEP,
};
pub use dual::{dual_explicit, dual_explicit_direct, dual_l2_norm, DualEvaluation, DualNorm};
pub use limit::{
    inverse_moment_probe, sample_limit_g, sample_limit_n, sample_limit_n_resampled,
    InverseMomentRow, LimitSample,
};
pub use linalg::{guarded_inverse, spectral_norm_of_inverse, symmetric_eigenvalues};
pub use matrix::{
    control_functions, control_functions_base, malliavin_derivative,
    malliavin_derivative_cross_check, malliavin_derivative_direct, matrix_gram, matrix_reduced,
    renormalize, reproduction, rotated_direction, solve_control, ControlFunctions,
    ControlSolution, MalliavinMatrix,
};
