//! Plane vectors standing in for complex numbers.
//!
//! The state space and all integrands live in the real plane; complex
//! multiplication appears only through rotations and quarter-turns, so it is
//! realized by explicit 2-vector operations and the block matrix `1 (+) R(u)`
//! acting on `(v_0, v_1, v_2)` columns.

use nalgebra::{Matrix2, Matrix3, Vector2};

/// Quarter-turn: multiplication by `i`.
pub fn quarter_turn(w: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-w.y, w.x)
}

/// The unit vector `e^{iu} = (cos u, sin u)`.
pub fn unit_vector(u: f64) -> Vector2<f64> {
    Vector2::new(u.cos(), u.sin())
}

/// Rotation by angle `u`.
pub fn rotation(u: f64) -> Matrix2<f64> {
    let (s, c) = u.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// The 3x3 block matrix `1 (+) R(u)` acting on `(v_0, v_1, v_2)`.
pub fn block_rotation(u: f64) -> Matrix3<f64> {
    let (s, c) = u.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Complex product of two plane vectors.
pub fn complex_mul(a: Vector2<f64>, b: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(a.x * b.x - a.y * b.y, a.x * b.y + a.y * b.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quarter_turn_squares_to_negation() {
        let w = Vector2::new(0.3, -1.7);
        assert_eq!(quarter_turn(quarter_turn(w)), -w);
    }

    #[test]
    fn rotation_matches_complex_product() {
        let u = 0.77;
        let w = Vector2::new(2.0, -0.5);
        assert_relative_eq!(rotation(u) * w, complex_mul(unit_vector(u), w), epsilon = 1e-14);
    }

    #[test]
    fn block_rotation_embeds_rotation() {
        let u = -1.3;
        let m = block_rotation(u);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(1, 0)], 0.0);
        assert_relative_eq!(
            m.fixed_view::<2, 2>(1, 1).into_owned(),
            rotation(u),
            epsilon = 1e-15
        );
    }
}
