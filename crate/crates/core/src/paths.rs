//! Brownian driving paths on uniform grids.
//!
//! Paths are built either from i.i.d. Gaussian increments or from a
//! truncated orthonormal-basis expansion `B(t) = sum_k g_k(t) xi_k`. The
//! basis construction retains its Gaussian coefficients so downstream code
//! can differentiate with respect to them.

use crate::error::{KbmError, Result};
use crate::grid::TimeGrid;
use crate::rng::SeedSpec;

/// Gaussian coefficients `xi_0 .. xi_K` of a basis expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCoefficients {
    values: Vec<f64>,
}

impl GaussianCoefficients {
    /// Wrap explicit coefficient values; `values[k]` multiplies mode `k`.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Draw `K + 1` i.i.d. standard normals for modes `0 .. K`.
    pub fn sample(truncation: usize, seed: SeedSpec) -> Self {
        let mut values = vec![0.0; truncation + 1];
        seed.rng().fill_standard_normal(&mut values);
        Self { values }
    }

    /// Highest mode index `K`.
    pub fn truncation(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// How a path's node values were produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Cumulative sum of i.i.d. Gaussian increments.
    Increments,
    /// Truncated basis expansion with the retained coefficients.
    Basis(GaussianCoefficients),
}

/// A Brownian driver sampled on a uniform grid, `B(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    values: Vec<f64>,
    provenance: Provenance,
}

impl BrownianPath {
    /// Wrap explicit node values as a path; `values[0]` must be 0 and the
    /// length must match the grid.
    pub fn from_values(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KbmError::Domain(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(KbmError::Domain(format!("paths start at 0, got {}", values[0])));
        }
        Ok(Self { grid, values, provenance: Provenance::Increments })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The endpoint value `B(T)`.
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("grid has at least 3 nodes")
    }
}

/// Sample a path from i.i.d. Gaussian increments of variance `T / n`.
pub fn sample_increments(grid: TimeGrid, seed: SeedSpec) -> BrownianPath {
    let mut rng = seed.rng();
    let sqrt_dt = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    let mut b = 0.0;
    for _ in 0..grid.steps() {
        b += sqrt_dt * rng.standard_normal();
        values.push(b);
    }
    BrownianPath { grid, values, provenance: Provenance::Increments }
}

/// Sample a planar path: two independent coordinate paths from one stream.
pub fn sample_planar_increments(grid: TimeGrid, seed: SeedSpec) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seed.rng();
    let sqrt_dt = grid.dt().sqrt();
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    xs.push(0.0);
    ys.push(0.0);
    let (mut x, mut y) = (0.0, 0.0);
    for _ in 0..grid.steps() {
        x += sqrt_dt * rng.standard_normal();
        y += sqrt_dt * rng.standard_normal();
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

/// An orthonormal system `(g_k)` whose primitives expand Brownian motion on
/// `[0, T]` as `B(t) = sum_k g_k(t) xi_k` with i.i.d. standard normal `xi_k`.
///
/// Implementations provide the integrated modes `g_{k,T}`; the default is
/// the Karhunen-Loeve sine system.
pub trait IntegratedBasis {
    /// Integrated mode `g_{k,T}(t)` for `t` in `[0, T]`.
    fn mode(&self, k: usize, horizon: f64, t: f64) -> f64;
}

/// The Karhunen-Loeve system: a linear mode plus sine modes.
#[derive(Debug, Clone, Copy, Default)]
pub struct KarhunenLoeve;

impl IntegratedBasis for KarhunenLoeve {
    fn mode(&self, k: usize, horizon: f64, t: f64) -> f64 {
        if k == 0 {
            t / horizon.sqrt()
        } else {
            let kf = k as f64;
            (2.0 * horizon).sqrt() / (std::f64::consts::PI * kf)
                * (kf * std::f64::consts::PI * t / horizon).sin()
        }
    }
}

/// Integrated Karhunen-Loeve mode `g_{k,T}(t)`: `t / sqrt(T)` for `k = 0`,
/// `(sqrt(2T) / (pi k)) sin(k pi t / T)` for `k >= 1`.
pub fn kl_basis(k: usize, horizon: f64, t: f64) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(KbmError::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(KbmError::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    Ok(KarhunenLoeve.mode(k, horizon, t))
}

/// Node values of all modes `0 ..= K`, one row per mode.
///
/// Shared precomputation for repeated basis-path assembly on a fixed grid.
pub fn basis_table<B: IntegratedBasis>(basis: &B, grid: TimeGrid, truncation: usize) -> Vec<Vec<f64>> {
    (0..=truncation)
        .map(|k| grid.nodes().map(|t| basis.mode(k, grid.horizon(), t)).collect())
        .collect()
}

/// Assemble a path from explicit coefficients against a precomputed table.
pub fn path_from_table(grid: TimeGrid, table: &[Vec<f64>], xi: &GaussianCoefficients) -> BrownianPath {
    assert!(table.len() > xi.truncation(), "table shorter than coefficient vector");
    let mut values = vec![0.0; grid.len()];
    for (k, row) in table.iter().enumerate().take(xi.truncation() + 1) {
        let c = xi.values()[k];
        if c != 0.0 {
            for (v, g) in values.iter_mut().zip(row) {
                *v += c * g;
            }
        }
    }
    values[0] = 0.0;
    BrownianPath { grid, values, provenance: Provenance::Basis(xi.clone()) }
}

/// Assemble a path from explicit coefficients in the Karhunen-Loeve system.
pub fn path_from_coefficients(grid: TimeGrid, xi: &GaussianCoefficients) -> BrownianPath {
    let table = basis_table(&KarhunenLoeve, grid, xi.truncation());
    path_from_table(grid, &table, xi)
}

/// Sample a truncated Karhunen-Loeve path with modes `0 ..= K`.
pub fn sample_kl_path(grid: TimeGrid, truncation: usize, seed: SeedSpec) -> BrownianPath {
    assert!(truncation >= 1, "basis sampling needs at least modes 0 and 1");
    let xi = GaussianCoefficients::sample(truncation, seed);
    path_from_coefficients(grid, &xi)
}

/// Max over grid nodes of `|t - sum_{k<=K} g_{k,T}(t)^2|`.
///
/// The full sum of squared modes equals `t`; the residual measures the
/// truncation and is bounded by `2T / (pi^2 K)`.
pub fn basis_completeness_residual(grid: TimeGrid, truncation: usize) -> f64 {
    let table = basis_table(&KarhunenLoeve, grid, truncation);
    let mut worst: f64 = 0.0;
    for (i, t) in grid.nodes().enumerate() {
        let sum: f64 = table.iter().map(|row| row[i] * row[i]).sum();
        worst = worst.max((t - sum).abs());
    }
    worst
}

/// Rescale a path on `[0, T]` to the unit interval: `B~(s) = B(Ts) / sqrt(T)`.
pub fn rescale_to_unit(path: &BrownianPath) -> BrownianPath {
    rescale(path, 1.0)
}

/// Rescale a path to a new horizon: `B'(t) = sqrt(T'/T) B(t T / T')`.
///
/// Inverse of [`rescale_to_unit`] when `horizon` is the original `T`.
pub fn rescale(path: &BrownianPath, horizon: f64) -> BrownianPath {
    let grid = path.grid().with_horizon(horizon).expect("source grid is valid");
    let scale = (horizon / path.grid().horizon()).sqrt();
    let values = path.values().iter().map(|b| scale * b).collect();
    BrownianPath { grid, values, provenance: path.provenance().clone() }
}
