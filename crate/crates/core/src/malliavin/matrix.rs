//! Control functions, the Gram / reduced Malliavin matrix, the control
//! solve, and the Malliavin derivative of the endpoint.

use super::linalg::guarded_inverse;
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::kbm::{Direction, KineticPath};
use crate::plane::{block_rotation, quarter_turn, rotation};
use nalgebra::{Matrix3, Vector2, Vector3};

/// The control functions `h_0 = 1`, `h_1(t) = int_0^t sin(u + B)`,
/// `h_2(t) = -int_0^t cos(u + B)` sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFunctions {
    base_angle: f64,
    grid: TimeGrid,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl ControlFunctions {
    pub fn base_angle(&self) -> f64 {
        self.base_angle
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    pub fn h2(&self) -> &[f64] {
        &self.h2
    }
}

/// Control functions of a path, at the path's own base angle.
///
/// They are the components of the rotated phase prefix:
/// `e^{iu} E(t) = (-h_2(t), h_1(t))`, so the same trapezoid values feed the
/// flow, the tangent matrices, and the Gram matrix.
pub fn control_functions(kp: &KineticPath) -> ControlFunctions {
    let rot = rotation(kp.start().u);
    let mut h1 = Vec::with_capacity(kp.grid().len());
    let mut h2 = Vec::with_capacity(kp.grid().len());
    for e in kp.phase_prefix() {
        let r = rot * e;
        h1.push(r.y);
        h2.push(-r.x);
    }
    ControlFunctions { base_angle: kp.start().u, grid: kp.grid(), h1, h2 }
}

/// Control functions of the driver alone (base angle 0), regardless of the
/// path's starting state.
pub fn control_functions_base(kp: &KineticPath) -> ControlFunctions {
    let mut h1 = Vec::with_capacity(kp.grid().len());
    let mut h2 = Vec::with_capacity(kp.grid().len());
    for e in kp.phase_prefix() {
        h1.push(e.y);
        h2.push(-e.x);
    }
    ControlFunctions { base_angle: 0.0, grid: kp.grid(), h1, h2 }
}

/// The 3x3 symmetric PSD Gram matrix of the control functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalliavinMatrix {
    matrix: Matrix3<f64>,
    horizon: f64,
    base_angle: f64,
}

impl MalliavinMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn base_angle(&self) -> f64 {
        self.base_angle
    }

    pub fn from_parts(matrix: Matrix3<f64>, horizon: f64, base_angle: f64) -> Self {
        Self { matrix, horizon, base_angle }
    }
}

fn trapz_weight(i: usize, steps: usize, dt: f64) -> f64 {
    if i == 0 || i == steps {
        0.5 * dt
    } else {
        dt
    }
}

/// Gram matrix `C_ij = <h_i, h_j>` on `[0, T]` by trapezoid.
///
/// The `(0, 0)` entry is the trapezoid integral of the constant 1, which is
/// exactly the horizon.
pub fn matrix_gram(cf: &ControlFunctions) -> MalliavinMatrix {
    let grid = cf.grid;
    let steps = grid.steps();
    let dt = grid.dt();
    let mut c01 = 0.0;
    let mut c02 = 0.0;
    let mut c11 = 0.0;
    let mut c12 = 0.0;
    let mut c22 = 0.0;
    for i in 0..=steps {
        let w = trapz_weight(i, steps, dt);
        let (a, b) = (cf.h1[i], cf.h2[i]);
        c01 += w * a;
        c02 += w * b;
        c11 += w * a * a;
        c12 += w * a * b;
        c22 += w * b * b;
    }
    let t = grid.horizon();
    let matrix = Matrix3::new(t, c01, c02, c01, c11, c12, c02, c12, c22);
    MalliavinMatrix { matrix, horizon: t, base_angle: cf.base_angle }
}

/// The same matrix as `int_0^T (J_t^{-1} V)(J_t^{-1} V)^* dt`, assembled
/// from tangent-flow columns node by node.
pub fn matrix_reduced(kp: &KineticPath) -> MalliavinMatrix {
    let grid = kp.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    let mut acc = Matrix3::zeros();
    for i in 0..=steps {
        let w = trapz_weight(i, steps, dt);
        let col = kp.tangent(i).inverse().apply(&Direction::horizontal()).as_vector();
        acc.syger(w, &col, &col, 1.0);
    }
    // syger fills only the lower triangle; mirror it.
    for r in 0..3 {
        for c in (r + 1)..3 {
            acc[(r, c)] = acc[(c, r)];
        }
    }
    MalliavinMatrix { matrix: acc, horizon: grid.horizon(), base_angle: kp.start().u }
}

/// Renormalized matrix `D^{-1} C D^{-1}` with `D = diag(sqrt(T), T, T)`;
/// its `(0, 0)` entry is exactly 1.
pub fn renormalize(m: &MalliavinMatrix) -> Matrix3<f64> {
    let t = m.horizon;
    let d_inv = Matrix3::from_diagonal(&Vector3::new(1.0 / t.sqrt(), 1.0 / t, 1.0 / t));
    let mut out = d_inv * m.matrix * d_inv;
    out[(0, 0)] = 1.0;
    out
}

/// The reproduction map `a(h) = (<h_0, h>, <h_1, h>, <h_2, h>)` against the
/// given control functions.
pub fn reproduction(cf: &ControlFunctions, h: &[f64]) -> Vector3<f64> {
    let grid = cf.grid;
    let steps = grid.steps();
    let dt = grid.dt();
    debug_assert_eq!(h.len(), grid.len());
    let mut a = Vector3::zeros();
    for i in 0..=steps {
        let w = trapz_weight(i, steps, dt);
        a[0] += w * h[i];
        a[1] += w * cf.h1[i] * h[i];
        a[2] += w * cf.h2[i] * h[i];
    }
    a
}

/// The control `h = sum lambda_i h_i` reproducing a direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub lambda: Vector3<f64>,
    /// `h` sampled on the grid.
    pub values: Vec<f64>,
    pub direction: Direction,
}

/// Solve the control system `a(h) = -v` within the span of the control
/// functions: `lambda = -C^{-1} v`, refined by one residual-correction step
/// so the discrete reproduction holds to machine precision.
///
/// `m` must be the Gram matrix of `cf`. Degenerate paths (for example the
/// zero driver) raise [`KbmError::SingularMatrix`].
pub fn solve_control(m: &MalliavinMatrix, cf: &ControlFunctions, v: &Direction) -> Result<ControlSolution> {
    assert_eq!(m.base_angle, cf.base_angle, "matrix and control functions disagree on base angle");
    let inv = guarded_inverse(&m.matrix)?;
    let target = -v.as_vector();
    let mut lambda = inv * target;
    // One step of iterative refinement against the Gram matrix.
    let residual = m.matrix * lambda - target;
    lambda -= inv * residual;
    let values = (0..cf.grid.len())
        .map(|i| lambda[0] + lambda[1] * cf.h1[i] + lambda[2] * cf.h2[i])
        .collect();
    Ok(ControlSolution { lambda, values, direction: *v })
}

/// Malliavin derivative of the endpoint in the direction of a Cameron-
/// Martin perturbation with density `h`:
/// `D X_T(h) = (int_0^T h, i e^{iu} int_0^T h(t) (E(T) - E(t)) dt)`.
///
/// This is the rearranged (integration-by-parts) order of the double
/// integral; under the crate's uniform trapezoid rule it is the form that
/// satisfies `J_T v + D X_T(h) = 0` exactly when `h` solves the control
/// system.
pub fn malliavin_derivative(kp: &KineticPath, h: &[f64]) -> Direction {
    let grid = kp.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    debug_assert_eq!(h.len(), grid.len());
    let prefix = kp.phase_prefix();
    let e_total = prefix[steps];
    let mut angular = 0.0;
    let mut plane = Vector2::zeros();
    for i in 0..=steps {
        let w = trapz_weight(i, steps, dt);
        angular += w * h[i];
        plane += w * h[i] * (e_total - prefix[i]);
    }
    Direction::new(angular, quarter_turn(rotation(kp.start().u) * plane))
}

/// The same derivative in the original integral order
/// `i e^{iu} int_0^T e^{iB_t} (int_0^t h) dt`.
pub fn malliavin_derivative_direct(kp: &KineticPath, h: &[f64]) -> Direction {
    let grid = kp.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    debug_assert_eq!(h.len(), grid.len());
    let mut angular = 0.0;
    let mut h_prefix = 0.0;
    let mut plane = Vector2::zeros();
    let mut prev_h = h[0];
    for i in 0..=steps {
        if i > 0 {
            h_prefix += 0.5 * dt * (prev_h + h[i]);
            prev_h = h[i];
        }
        let w = trapz_weight(i, steps, dt);
        angular += w * h[i];
        plane += w * h_prefix * crate::plane::unit_vector(kp.driver().value(i));
    }
    Direction::new(angular, quarter_turn(rotation(kp.start().u) * plane))
}

/// Defect between the two integral orders after removing the exact
/// trapezoid boundary term `(dt^2 / 4)(h(T) e^{iB_T} - h(0) e^{iB_0})`.
///
/// Swapping the order of a double trapezoid sum over the triangle
/// `{s <= t}` leaves exactly that boundary term, so the returned value is
/// pure floating-point noise when both routes are implemented consistently.
pub fn malliavin_derivative_cross_check(kp: &KineticPath, h: &[f64]) -> f64 {
    let a = malliavin_derivative_direct(kp, h);
    let b = malliavin_derivative(kp, h);
    let grid = kp.grid();
    let dt = grid.dt();
    let steps = grid.steps();
    let boundary = 0.25
        * dt
        * dt
        * (h[steps] * crate::plane::unit_vector(kp.driver().value(steps))
            - h[0] * crate::plane::unit_vector(kp.driver().value(0)));
    let rotated = quarter_turn(rotation(kp.start().u) * boundary);
    ((a.angular - b.angular).powi(2) + (a.plane - b.plane - rotated).norm_squared()).sqrt()
}

/// Rotated target `(1 (+) R(-u)) v` used by the angle-0 formulations.
pub fn rotated_direction(base_angle: f64, v: &Direction) -> Vector3<f64> {
    block_rotation(-base_angle) * v.as_vector()
}
