//! Closed-form evaluation of the Malliavin dual (Skorokhod integral) of the
//! reproducing control, as a weight row applied to the direction.
//!
//! For the control `h` solving the reproduction system in direction `v`,
//! the dual divergence is affine in the rotated direction:
//! `-delta(h) = N . (1 (+) R(-u)) v`, where the weight row `N` depends only
//! on the driver. It splits into a boundary part
//! `b = (B_T, -i int_0^T e^{iB_t} (B_T - B_t) dt)` applied through the
//! inverse Gram matrix, and a double-integral part over the triangle
//! `{s <= t}` with kernel
//! `K(t, s) = [[0, e_s^T], [e_s, -e_s (iE_t)^T - iE_t e_s^T]]`,
//! `e_s = e^{iB_s}`, sandwiched between two inverse Gram factors:
//! `N = C^{-1} (b + int_0^T int_0^t K(t, s)^T C^{-1} m(s) ds dt)` with
//! `m(s) = (s, i int_0^s (rho - s) e^{iB_rho} d rho)`.
//!
//! The double integral collapses to prefix sums in `s`, so the whole weight
//! row costs `O(n)` after the Gram inversion; a literal `O(n^2)` double
//! trapezoid sum is kept as an oracle.

use super::linalg::guarded_inverse;
use super::matrix::{control_functions_base, matrix_gram};
use crate::error::{KbmError, Result};
use crate::kbm::{flow, Direction, KineticPath, KineticState};
use crate::paths::sample_increments;
use crate::plane::{block_rotation, quarter_turn, unit_vector};
use crate::rng::SeedSpec;
use crate::stats::{replicate_map, RunningStat};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// The dual weight row of one path, ready to pair with any direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEvaluation {
    weight_row: Vector3<f64>,
    horizon: f64,
    base_angle: f64,
}

impl DualEvaluation {
    /// The raw weight row `N`.
    pub fn weight_row(&self) -> Vector3<f64> {
        self.weight_row
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn base_angle(&self) -> f64 {
        self.base_angle
    }

    /// The renormalized weight row `N~ = N diag(1, sqrt(T), sqrt(T))`, which
    /// has a nondegenerate law in the large-time limit.
    pub fn renormalized(&self) -> Vector3<f64> {
        let s = self.horizon.sqrt();
        Vector3::new(self.weight_row[0], s * self.weight_row[1], s * self.weight_row[2])
    }

    /// The dual value `delta(h(v)) = -N . (1 (+) R(-u)) v`.
    pub fn delta(&self, v: &Direction) -> f64 {
        -self.weight_row.dot(&(block_rotation(-self.base_angle) * v.as_vector()))
    }
}

struct DriverIntegrals {
    /// `m(s)^T C^{-1}` at every node, split into angular and plane parts.
    lead0: Vec<f64>,
    leadc: Vec<Vector2<f64>>,
    unit: Vec<Vector2<f64>>,
    inverse_gram: Matrix3<f64>,
    boundary: Vector3<f64>,
}

fn driver_integrals(kp: &KineticPath) -> Result<DriverIntegrals> {
    let grid = kp.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let driver = kp.driver();
    let prefix = kp.phase_prefix();
    let inverse_gram = guarded_inverse(matrix_gram(&control_functions_base(kp)).matrix())?;

    let unit: Vec<Vector2<f64>> = (0..=n).map(|i| unit_vector(driver.value(i))).collect();

    // Trapezoid prefixes F(s) = int_0^s rho e^{iB}, G(s) = int_0^s B e^{iB}.
    let mut f = Vector2::zeros();
    let mut g = Vector2::zeros();
    let mut lead0 = Vec::with_capacity(n + 1);
    let mut leadc = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i > 0 {
            let (t0, t1) = (grid.node(i - 1), grid.node(i));
            f += 0.5 * dt * (t0 * unit[i - 1] + t1 * unit[i]);
            g += 0.5 * dt * (driver.value(i - 1) * unit[i - 1] + driver.value(i) * unit[i]);
        }
        let s = grid.node(i);
        let m = Direction::new(s, quarter_turn(f - s * prefix[i])).as_vector();
        let lead = inverse_gram * m;
        lead0.push(lead[0]);
        leadc.push(Vector2::new(lead[1], lead[2]));
    }

    let b_t = driver.terminal();
    let boundary_plane = -quarter_turn(b_t * prefix[n] - g);
    let boundary = Vector3::new(b_t, boundary_plane.x, boundary_plane.y);
    Ok(DriverIntegrals { lead0, leadc, unit, inverse_gram, boundary })
}

fn assemble(kp: &KineticPath, double_part: Vector3<f64>, d: &DriverIntegrals) -> DualEvaluation {
    let weight_row = d.inverse_gram * (d.boundary + double_part);
    DualEvaluation { weight_row, horizon: kp.grid().horizon(), base_angle: kp.start().u }
}

/// Evaluate the dual weight row of a path in `O(n)` time.
///
/// Errors with [`KbmError::SingularMatrix`] when the path's Gram matrix is
/// degenerate.
pub fn dual_explicit(kp: &KineticPath) -> Result<DualEvaluation> {
    let grid = kp.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let prefix = kp.phase_prefix();
    let d = driver_integrals(kp)?;

    // Trapezoid prefixes in s of the kernel contraction:
    // q(s) = leadc(s) . e_s, then
    // Q(t) = int q, P(t) = int lead0 e_s, S(t)_{ab} = int e_s[a] leadc[b].
    let mut q_acc = 0.0;
    let mut p_acc = Vector2::zeros();
    let mut s_acc = Matrix2::zeros();
    let mut double_part = Vector3::zeros();
    let q_at = |i: usize| d.leadc[i].dot(&d.unit[i]);
    for j in 0..=n {
        if j > 0 {
            q_acc += 0.5 * dt * (q_at(j - 1) + q_at(j));
            p_acc += 0.5 * dt * (d.lead0[j - 1] * d.unit[j - 1] + d.lead0[j] * d.unit[j]);
            s_acc += 0.5
                * dt
                * (d.unit[j - 1] * d.leadc[j - 1].transpose() + d.unit[j] * d.leadc[j].transpose());
        }
        let w = if j == 0 || j == n { 0.5 * dt } else { dt };
        let ie = quarter_turn(prefix[j]);
        let plane = p_acc - q_acc * ie - s_acc * ie;
        double_part += w * Vector3::new(q_acc, plane.x, plane.y);
    }
    Ok(assemble(kp, double_part, &d))
}

/// The same weight row through the literal `O(n^2)` double trapezoid sum
/// over the triangle `{s <= t}`; oracle for [`dual_explicit`].
pub fn dual_explicit_direct(kp: &KineticPath) -> Result<DualEvaluation> {
    let grid = kp.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let prefix = kp.phase_prefix();
    let d = driver_integrals(kp)?;

    let mut double_part = Vector3::zeros();
    for j in 0..=n {
        let wt = if j == 0 || j == n { 0.5 * dt } else { dt };
        let ie = quarter_turn(prefix[j]);
        let mut inner = Vector3::zeros();
        for i in 0..=j {
            let ws = if i == 0 || i == j { 0.5 * dt } else { dt };
            let e = d.unit[i];
            let q = d.leadc[i].dot(&e);
            let plane = d.lead0[i] * e - q * ie - d.leadc[i].dot(&ie) * e;
            inner += ws * Vector3::new(q, plane.x, plane.y);
        }
        double_part += wt * inner;
    }
    Ok(assemble(kp, double_part, &d))
}

/// Monte Carlo `L^2` norm of the dual paired with a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualNorm {
    pub horizon: f64,
    /// `sqrt(E[delta(h(v))^2])`.
    pub norm: f64,
    /// Delta-method standard error of the norm.
    pub stderr: f64,
    pub paths: u64,
    pub singular: u64,
}

/// Estimate `sqrt(E[delta(h(v))^2])` at angle 0 over fresh driver paths.
///
/// Singular paths are skipped and counted; more than 0.1% of them fails the
/// run with [`KbmError::TooManySingularPaths`].
pub fn dual_l2_norm(
    v: &Direction,
    horizon: f64,
    steps: usize,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
) -> Result<DualNorm> {
    let grid = crate::grid::TimeGrid::new(horizon, steps)?;
    let v = *v;
    let per_path = replicate_map(threads, paths, move |i| {
        let driver = sample_increments(grid, seed.with_stream(i));
        let kp = flow(KineticState::new(0.0, Vector2::zeros()), driver, false);
        dual_explicit(&kp).map(|d| d.delta(&v)).ok()
    });
    let mut stat = RunningStat::new();
    let mut singular = 0u64;
    for value in per_path {
        match value {
            Some(x) => stat.push(x * x),
            None => singular += 1,
        }
    }
    if stat.count() == 0 || singular as f64 > 1e-3 * paths as f64 {
        return Err(KbmError::TooManySingularPaths { failures: singular, total: paths });
    }
    let mean_square = stat.mean();
    let norm = mean_square.sqrt();
    let stderr = if norm > 0.0 { stat.std_err() / (2.0 * norm) } else { 0.0 };
    Ok(DualNorm { horizon, norm, stderr, paths, singular })
}
