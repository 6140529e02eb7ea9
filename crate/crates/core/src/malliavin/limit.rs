//! Samplers for the large-time limits of the renormalized Malliavin matrix
//! and dual weight row, driven by a planar Brownian motion on `[0, 1]`.
//!
//! The renormalized matrix converges in law to
//! `G = int_0^1 I(r) I(r)^T dr` with `I(r) = (1, sqrt(2) W_r)`, and the
//! renormalized weight row to
//! `N = sqrt(2) int_0^1 int_0^t m(s)^T G^{-1} K(dW_s, t) ds G^{-1} dt`
//! with `m(s) = (s, sqrt(2) int_0^s W)` and
//! `K(dW, t) = [[0, dW^T], [dW, sqrt(2) (dW W_t^T + W_t dW^T)]]`.
//!
//! The `dW_s` integral is a divergence (Skorokhod) integral: its integrand
//! anticipates the driver through `G^{-1}` and `W_t`, so a left-point sum
//! would be off by the Malliavin trace term. The sampler therefore expands
//! the planar driver in Karhunen-Loeve modes and evaluates the divergence
//! by the finite-dimensional Gaussian integration-by-parts formula
//! `sum (c_k xi_k - d c_k / d xi_k)`, which has mean zero by construction;
//! coefficient derivatives are central finite differences, the same device
//! as the basis-truncated dual oracle.

use super::linalg::{guarded_inverse, spectral_norm_of_inverse};
use super::matrix::{control_functions_base, matrix_gram, renormalize};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::kbm::{flow, KineticState};
use crate::malliavin::basis::kl_basis_derivative;
use crate::paths::{basis_table, sample_increments, sample_planar_increments, KarhunenLoeve};
use crate::rng::SeedSpec;
use crate::stats::{replicate_map, RunningStat};
use nalgebra::{Matrix3, Vector2, Vector3};

/// Coefficient step for the divergence finite differences.
const LIMIT_FD_STEP: f64 = 1e-4;

/// Stream stride between retry attempts of the resampling wrapper, far
/// above any replicate index.
const RESAMPLE_STRIDE: u64 = 1 << 32;

/// One draw of the limit pair: the matrix `G` and the weight row `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSample {
    pub matrix: Matrix3<f64>,
    pub vector: Vector3<f64>,
}

fn limit_matrix(xs: &[f64], ys: &[f64], dt: f64) -> Matrix3<f64> {
    let n = xs.len() - 1;
    let mut g = Matrix3::zeros();
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 * dt } else { dt };
        let row = Vector3::new(1.0, std::f64::consts::SQRT_2 * xs[i], std::f64::consts::SQRT_2 * ys[i]);
        g += w * row * row.transpose();
    }
    g[(0, 0)] = 1.0;
    g
}

/// Sample the limit matrix `G` on a grid of `steps` steps.
///
/// Its `(0, 0)` entry is exactly 1 and `E[G(1, 1)] = E[G(2, 2)] = 1`.
pub fn sample_limit_g(steps: usize, seed: SeedSpec) -> Result<Matrix3<f64>> {
    let grid = TimeGrid::unit(steps)?;
    let (xs, ys) = sample_planar_increments(grid, seed);
    Ok(limit_matrix(&xs, &ys, grid.dt()))
}

/// The Skorokhod integrand of the weight row, sampled on the grid:
/// `rows[i][a]` is the 3-component coefficient of `dW_s[a]` at node `i`,
/// with both inverse-matrix factors and the overall `sqrt(2)` folded in.
struct LimitIntegrand {
    matrix: Matrix3<f64>,
    rows: Vec<[Vector3<f64>; 2]>,
}

fn limit_integrand(xs: &[f64], ys: &[f64], grid: TimeGrid) -> Result<LimitIntegrand> {
    let n = grid.steps();
    let dt = grid.dt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let matrix = limit_matrix(xs, ys, dt);
    let inv = guarded_inverse(&matrix)?;

    // lambda(s) = G^{-1} m(s) with m(s) = (s, sqrt(2) int_0^s W), and the
    // suffix integral Omega(s) = int_s^1 W dt.
    let w_at = |i: usize| Vector2::new(xs[i], ys[i]);
    let mut omega = vec![Vector2::zeros(); n + 1];
    for i in (0..n).rev() {
        omega[i] = omega[i + 1] + 0.5 * dt * (w_at(i) + w_at(i + 1));
    }
    let mut w_prefix = Vector2::zeros();
    let mut rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i > 0 {
            w_prefix += 0.5 * dt * (w_at(i - 1) + w_at(i));
        }
        let m = Vector3::new(grid.node(i), sqrt2 * w_prefix.x, sqrt2 * w_prefix.y);
        let lambda = inv * m;
        let lambda0 = lambda[0];
        let lambdac = Vector2::new(lambda[1], lambda[2]);
        let tail = 1.0 - grid.node(i);
        let cross = lambdac.dot(&omega[i]);
        let mut pair = [Vector3::zeros(); 2];
        for (a, slot) in pair.iter_mut().enumerate() {
            // t-integrated kernel row against the unit bump e_a; the kernel
            // slots hold the quarter-turned increment, so the bump enters
            // rotated as eps = i e_a.
            let eps = if a == 0 { Vector2::new(0.0, 1.0) } else { Vector2::new(-1.0, 0.0) };
            let lc_eps = lambdac.dot(&eps);
            let r = Vector3::new(
                tail * lc_eps,
                (tail * lambda0 + sqrt2 * cross) * eps.x + sqrt2 * lc_eps * omega[i].x,
                (tail * lambda0 + sqrt2 * cross) * eps.y + sqrt2 * lc_eps * omega[i].y,
            );
            *slot = sqrt2 * (inv * r);
        }
        rows.push(pair);
    }
    Ok(LimitIntegrand { matrix, rows })
}

/// Projection `int_0^1 rows[.][a] e_k(s) ds` of one integrand component
/// onto one mode derivative.
fn project(rows: &[[Vector3<f64>; 2]], a: usize, mode: &[f64], dt: f64) -> Vector3<f64> {
    let n = rows.len() - 1;
    let mut acc = Vector3::zeros();
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 * dt } else { dt };
        acc += w * mode[i] * rows[i][a];
    }
    acc
}

/// Sample the limit pair `(G, N)` from one planar driver expanded in
/// `truncation + 1` Karhunen-Loeve modes per coordinate.
///
/// Errors with [`crate::error::KbmError::SingularMatrix`] on the rare draws
/// whose matrix (or a finite-difference perturbation of it) fails the
/// inversion guard.
pub fn sample_limit_n(steps: usize, truncation: usize, seed: SeedSpec) -> Result<LimitSample> {
    let grid = TimeGrid::unit(steps)?;
    let dt = grid.dt();
    let table = basis_table(&KarhunenLoeve, grid, truncation);
    let derivs: Vec<Vec<f64>> = (0..=truncation)
        .map(|k| {
            grid.nodes()
                .map(|t| kl_basis_derivative(k, 1.0, t).expect("node is in range"))
                .collect()
        })
        .collect();

    // Mode coefficients, drawn pairwise per mode as (x, y).
    let mut rng = seed.rng();
    let xi: Vec<[f64; 2]> =
        (0..=truncation).map(|_| [rng.standard_normal(), rng.standard_normal()]).collect();

    let mut xs = vec![0.0; grid.len()];
    let mut ys = vec![0.0; grid.len()];
    for (k, row) in table.iter().enumerate() {
        for i in 0..grid.len() {
            xs[i] += xi[k][0] * row[i];
            ys[i] += xi[k][1] * row[i];
        }
    }

    let center = limit_integrand(&xs, &ys, grid)?;
    let mut vector = Vector3::zeros();
    let mut bumped = vec![0.0; grid.len()];
    for a in 0..2 {
        let base: &[f64] = if a == 0 { &xs } else { &ys };
        for k in 0..=truncation {
            vector += xi[k][a] * project(&center.rows, a, &derivs[k], dt);
            // Central finite difference of the same coefficient in xi_k^a.
            let mut coeff_at = |eps: f64| -> Result<Vector3<f64>> {
                for (b, (x, g)) in bumped.iter_mut().zip(base.iter().zip(&table[k])) {
                    *b = x + eps * g;
                }
                let integrand = if a == 0 {
                    limit_integrand(&bumped, &ys, grid)?
                } else {
                    limit_integrand(&xs, &bumped, grid)?
                };
                Ok(project(&integrand.rows, a, &derivs[k], dt))
            };
            let plus = coeff_at(LIMIT_FD_STEP)?;
            let minus = coeff_at(-LIMIT_FD_STEP)?;
            vector -= (plus - minus) / (2.0 * LIMIT_FD_STEP);
        }
    }
    Ok(LimitSample { matrix: center.matrix, vector })
}

/// [`sample_limit_n`] retried on fresh substreams when the inversion guard
/// rejects a draw; gives up after `max_attempts` tries.
pub fn sample_limit_n_resampled(
    steps: usize,
    truncation: usize,
    seed: SeedSpec,
    max_attempts: u64,
) -> Result<LimitSample> {
    let mut last = sample_limit_n(steps, truncation, seed);
    let mut attempt = 1;
    while last.is_err() && attempt < max_attempts {
        last = sample_limit_n(
            steps,
            truncation,
            seed.with_stream(seed.stream + attempt * RESAMPLE_STRIDE),
        );
        attempt += 1;
    }
    last
}

/// One row of the inverse-moment scan: `E[||C~(T)^{-1}||^p]` over paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMomentRow {
    pub horizon: f64,
    pub power: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Paths rejected by the inversion guard, excluded from the mean.
    pub singular: u64,
    pub paths: u64,
}

/// Scan `E[||C~(T)^{-1}||^p]` over horizons and powers, `||.||` spectral.
///
/// `steps_rule` picks the grid resolution per horizon. Singular paths are
/// counted per horizon and excluded; callers decide how many are too many.
pub fn inverse_moment_probe<S>(
    horizons: &[f64],
    powers: &[f64],
    steps_rule: S,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
) -> Result<Vec<InverseMomentRow>>
where
    S: Fn(f64) -> usize,
{
    let mut rows = Vec::with_capacity(horizons.len() * powers.len());
    for (hi, &horizon) in horizons.iter().enumerate() {
        let grid = TimeGrid::new(horizon, steps_rule(horizon))?;
        let stream_base = seed.stream + (hi as u64) * RESAMPLE_STRIDE;
        let norms = replicate_map(threads, paths, |i| {
            let driver = sample_increments(grid, seed.with_stream(stream_base + i));
            let kp = flow(KineticState::new(0.0, Vector2::zeros()), driver, false);
            let tilde = renormalize(&matrix_gram(&control_functions_base(&kp)));
            spectral_norm_of_inverse(&tilde).ok()
        });
        let singular = norms.iter().filter(|n| n.is_none()).count() as u64;
        for &power in powers {
            let mut stat = RunningStat::new();
            for norm in norms.iter().flatten() {
                stat.push(norm.powf(power));
            }
            rows.push(InverseMomentRow {
                horizon,
                power,
                mean: stat.mean(),
                stderr: stat.std_err(),
                singular,
                paths,
            });
        }
    }
    Ok(rows)
}
