//! Guarded inversion of symmetric positive semidefinite 3x3 matrices.
//!
//! Paths exist (for example the zero driver) on which the Gram matrix
//! degenerates, and Monte Carlo loops must detect rather than amplify them.
//! Inversion goes through the symmetric eigendecomposition with a relative
//! eigenvalue floor; failures raise [`KbmError::SingularMatrix`] and callers
//! count them.

use crate::error::{KbmError, Result};
use nalgebra::{Matrix3, Vector3};

/// Relative eigenvalue floor: matrices whose smallest eigenvalue falls below
/// `RELATIVE_FLOOR * trace` are treated as singular.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix3<f64>) -> Vector3<f64> {
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Vector3::new(eig[0], eig[1], eig[2])
}

fn floor_for(m: &Matrix3<f64>) -> f64 {
    RELATIVE_FLOOR * m.trace().abs()
}

/// Inverse of a symmetric PSD matrix through its eigendecomposition.
///
/// Errors with [`KbmError::SingularMatrix`] when the smallest eigenvalue is
/// below `1e-12 * trace`.
pub fn guarded_inverse(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let eig = m.symmetric_eigen();
    let floor = floor_for(m);
    let min = eig.eigenvalues.min();
    if !(min.is_finite() && min > floor) {
        return Err(KbmError::SingularMatrix { min_eigenvalue: min, floor });
    }
    let inv_diag = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let q = eig.eigenvectors;
    Ok(q * inv_diag * q.transpose())
}

/// Spectral norm of the inverse of a symmetric PSD matrix, i.e. the
/// reciprocal of its smallest eigenvalue; errors as [`guarded_inverse`].
pub fn spectral_norm_of_inverse(m: &Matrix3<f64>) -> Result<f64> {
    let eig = symmetric_eigenvalues(m);
    let floor = floor_for(m);
    if !(eig[0].is_finite() && eig[0] > floor) {
        return Err(KbmError::SingularMatrix { min_eigenvalue: eig[0], floor });
    }
    Ok(1.0 / eig[0])
}
