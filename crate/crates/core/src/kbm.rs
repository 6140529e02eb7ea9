//! The kinetic flow `(U_t, Z_t)`, its tangent flow, and a weak-generator
//! consistency probe.
//!
//! The angle follows the driver exactly, `U_t = u + B_t`, and the position
//! integrates the unit vector: `Z_t = z + e^{iu} int_0^t e^{iB_s} ds`. All
//! time integrals use trapezoid quadrature on the driver's grid, applied
//! identically everywhere in the crate so pathwise linear-algebra identities
//! hold to machine precision.

use crate::catalog::TestFunction;
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::paths::{sample_increments, BrownianPath};
use crate::plane::{quarter_turn, rotation, unit_vector};
use crate::rng::SeedSpec;
use crate::stats::{mc_reduce, replicate_map, Estimate, RunningStat};
use nalgebra::{Matrix3, Vector2, Vector3};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// A point of the state space: angle `u` and plane position `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticState {
    pub u: f64,
    pub z: Vector2<f64>,
}

impl KineticState {
    pub fn new(u: f64, z: Vector2<f64>) -> Self {
        Self { u, z }
    }

    /// The angle reduced to `[0, 2 pi)`.
    pub fn angle_mod(&self) -> f64 {
        self.u.rem_euclid(TAU)
    }

    /// The same state with the angle normalized, for circle-mode reporting.
    pub fn normalized(&self) -> Self {
        Self { u: self.angle_mod(), z: self.z }
    }
}

/// A direction `(v_0, v_1, v_2)`: angular component plus plane component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub angular: f64,
    pub plane: Vector2<f64>,
}

impl Direction {
    pub fn new(angular: f64, plane: Vector2<f64>) -> Self {
        Self { angular, plane }
    }

    /// The canonical horizontal direction `(1, 0, 0)`.
    pub fn horizontal() -> Self {
        Self::new(1.0, Vector2::zeros())
    }

    /// The canonical vertical direction `(0, 1, 0)`.
    pub fn vertical() -> Self {
        Self::new(0.0, Vector2::new(1.0, 0.0))
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.angular, self.plane.x, self.plane.y)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, Vector2::new(v.y, v.z))
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(a * self.angular, a * self.plane)
    }

    pub fn add(&self, other: &Direction) -> Self {
        Self::new(self.angular + other.angular, self.plane + other.plane)
    }
}

/// The tangent flow `J_t` in its 3x3 real representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentMatrix {
    /// Lower-left plane column `i e^{iu} int_0^t e^{iB}`; the rest of the
    /// matrix is the identity.
    column: Vector2<f64>,
}

impl TangentMatrix {
    pub fn matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::identity();
        m[(1, 0)] = self.column.x;
        m[(2, 0)] = self.column.y;
        m
    }

    /// The exact inverse: the same matrix with the column negated.
    pub fn inverse(&self) -> TangentMatrix {
        TangentMatrix { column: -self.column }
    }

    pub fn apply(&self, v: &Direction) -> Direction {
        Direction::new(v.angular, v.plane + v.angular * self.column)
    }
}

/// A realized kinetic path with its tangent-flow data.
///
/// Caches the trapezoid prefix integrals `E(t_i) = int_0^{t_i} e^{iB} ds`
/// of the driver alone; positions and tangent matrices are assembled from
/// them by rotating through the starting angle.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticPath {
    start: KineticState,
    circle: bool,
    driver: BrownianPath,
    phase_prefix: Vec<Vector2<f64>>,
}

/// Trapezoid prefix integrals of `e^{iB}` over the driver's grid.
pub fn phase_prefix(driver: &BrownianPath) -> Vec<Vector2<f64>> {
    let dt = driver.grid().dt();
    let mut out = Vec::with_capacity(driver.values().len());
    let mut acc = Vector2::zeros();
    let mut prev = unit_vector(driver.value(0));
    out.push(acc);
    for &b in &driver.values()[1..] {
        let cur = unit_vector(b);
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
        out.push(acc);
    }
    out
}

/// Solve the flow from `x` along `driver`.
pub fn flow(x: KineticState, driver: BrownianPath, circle: bool) -> KineticPath {
    let phase_prefix = phase_prefix(&driver);
    KineticPath { start: x, circle, driver, phase_prefix }
}

impl KineticPath {
    pub fn start(&self) -> KineticState {
        self.start
    }

    pub fn circle(&self) -> bool {
        self.circle
    }

    pub fn driver(&self) -> &BrownianPath {
        &self.driver
    }

    pub fn grid(&self) -> TimeGrid {
        self.driver.grid()
    }

    /// `E(t_i) = int_0^{t_i} e^{iB} ds` for the driver alone (no rotation).
    pub fn phase_prefix(&self) -> &[Vector2<f64>] {
        &self.phase_prefix
    }

    /// The raw angle `u + B(t_i)`.
    pub fn angle(&self, i: usize) -> f64 {
        self.start.u + self.driver.value(i)
    }

    /// Position `Z(t_i) = z + e^{iu} E(t_i)`.
    pub fn position(&self, i: usize) -> Vector2<f64> {
        self.start.z + rotation(self.start.u) * self.phase_prefix[i]
    }

    /// State at node `i`; circle mode reports the angle mod `2 pi`.
    pub fn state(&self, i: usize) -> KineticState {
        let s = KineticState::new(self.angle(i), self.position(i));
        if self.circle {
            s.normalized()
        } else {
            s
        }
    }

    pub fn endpoint(&self) -> KineticState {
        self.state(self.phase_prefix.len() - 1)
    }

    /// Tangent flow `J_{t_i}`.
    pub fn tangent(&self, i: usize) -> TangentMatrix {
        TangentMatrix { column: quarter_turn(rotation(self.start.u) * self.phase_prefix[i]) }
    }

    /// The transported direction `J_T (J_t)^{-1} (1, 0, 0)`, i.e.
    /// `(1, i e^{iu} int_t^T e^{iB})`, for node indices `t_index <= stop`.
    pub fn transported_direction(&self, t_index: usize, stop: usize) -> Direction {
        debug_assert!(t_index <= stop);
        let seg = self.phase_prefix[stop] - self.phase_prefix[t_index];
        Direction::new(1.0, quarter_turn(rotation(self.start.u) * seg))
    }
}

/// Monte Carlo estimate of `(P_t f(x) - f(x)) / t - Lf(x)`.
///
/// Probes consistency of the flow with its generator
/// `L = (1/2) d^2_u + cos(u) d_{z1} + sin(u) d_{z2}`; the residual tends to
/// zero as `t_small` does, at rate `O(t_small)` for smooth `f`.
pub fn generator_residual(
    f: TestFunction,
    x: KineticState,
    t_small: f64,
    paths: u64,
    seed: SeedSpec,
) -> Result<Estimate> {
    let grid = TimeGrid::new(t_small, 256)?;
    let lf = f.generator_action(&x);
    let fx = f.eval(&x);
    let stats = replicate_map(0, paths, |i| {
        let driver = sample_increments(grid, seed.with_stream(i));
        let kp = flow(x, driver, false);
        let mut s = RunningStat::new();
        s.push((f.eval(&kp.endpoint()) - fx) / t_small - lf);
        s
    });
    Ok(mc_reduce(stats)?.to_estimate(seed))
}
