//! Oscillating integrals `int g(s) e^{i lambda B_s} ds` and empirical probes
//! of their limit behaviour: an Ito rearrangement identity, a law of large
//! numbers for periodic integrands, sub-Gaussian tails of the oscillation
//! functional, and Gaussian negative moments.

use crate::error::{KbmError, Result};
use crate::grid::TimeGrid;
use crate::paths::{sample_increments, BrownianPath};
use crate::plane::{quarter_turn, unit_vector};
use crate::rng::SeedSpec;
use crate::stats::{mc_reduce, replicate_map, RunningStat};
use nalgebra::{Matrix2, Vector2};
use statrs::function::gamma::gamma;

/// Trapezoid prefix integrals of `g(s) e^{i lambda B_s}` at the grid nodes.
pub fn osc_prefix<G: Fn(f64) -> f64>(g: G, lambda: f64, driver: &BrownianPath) -> Vec<Vector2<f64>> {
    let grid = driver.grid();
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = Vector2::zeros();
    let mut prev = g(grid.node(0)) * unit_vector(lambda * driver.value(0));
    out.push(acc);
    for i in 1..grid.len() {
        let cur = g(grid.node(i)) * unit_vector(lambda * driver.value(i));
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
        out.push(acc);
    }
    out
}

/// Trapezoid value of `int_0^t g(s) e^{i lambda B_s} ds` as a plane vector.
///
/// `t` need not be a grid node; the driver is interpolated linearly on the
/// last partial step.
pub fn osc_integral<G: Fn(f64) -> f64>(g: G, lambda: f64, driver: &BrownianPath, t: f64) -> Result<Vector2<f64>> {
    let grid = driver.grid();
    if !(0.0..=grid.horizon() * (1.0 + 1e-12)).contains(&t) {
        return Err(KbmError::Domain(format!("t = {t} outside [0, {}]", grid.horizon())));
    }
    let dt = grid.dt();
    let pos = (t / dt).min(grid.steps() as f64);
    let i = pos.floor() as usize;
    let prefix = osc_prefix(&g, lambda, driver);
    if i >= grid.steps() {
        return Ok(prefix[grid.steps()]);
    }
    let frac = pos - i as f64;
    if frac == 0.0 {
        return Ok(prefix[i]);
    }
    let b_t = driver.value(i) * (1.0 - frac) + driver.value(i + 1) * frac;
    let left = g(grid.node(i)) * unit_vector(lambda * driver.value(i));
    let right = g(t) * unit_vector(lambda * b_t);
    Ok(prefix[i] + 0.5 * frac * dt * (left + right))
}

/// Trapezoid value of the iterated integral
/// `int_0^1 (int_0^s l2(r) e^{i lambda B_r} dr) l1(s) (e^{i lambda B_s})* ds`
/// as a real 2x2 matrix (outer product of the inner integral with the
/// conjugated phase).
pub fn iterated_osc_integral<G1, G2>(l1: G1, l2: G2, lambda: f64, driver: &BrownianPath) -> Matrix2<f64>
where
    G1: Fn(f64) -> f64,
    G2: Fn(f64) -> f64,
{
    let grid = driver.grid();
    let dt = grid.dt();
    let inner = osc_prefix(&l2, lambda, driver);
    let mut acc = Matrix2::zeros();
    let term = |i: usize| -> Matrix2<f64> {
        let phase = unit_vector(lambda * driver.value(i));
        let conj = Vector2::new(phase.x, -phase.y);
        l1(grid.node(i)) * inner[i] * conj.transpose()
    };
    let mut prev = term(0);
    for i in 1..grid.len() {
        let cur = term(i);
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    acc
}

/// Outcome of the Ito rearrangement check for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoResidual {
    /// `sup_t` of the defect between the oscillating integral, its Ito-sum
    /// rearrangement, and the closed-form remainder.
    pub sup_residual: f64,
    /// Measured `sup_t |R(t)|` of the remainder term.
    pub sup_remainder: f64,
    /// The a priori remainder bound `(4 ||g|| + 2 ||g'||) / sqrt(T)`.
    pub remainder_bound: f64,
}

/// Check, pathwise, the rearrangement
/// `sqrt(T) int_0^t g e^{i sqrt(T) B} ds = 2i int_0^t g e^{i sqrt(T) B} dB + R(t)`
/// with `R(t) = (2/sqrt(T)) (g(0) - g(t) e^{i sqrt(T) B_t} + int_0^t g' e^{i sqrt(T) B} ds)`.
///
/// The stochastic integral uses left-point Ito sums on the driver's own
/// grid, so the residual is pure discretization error and vanishes under
/// refinement. `g_sup` and `dg_sup` are sup norms of `g` and `g'` on `[0, 1]`.
pub fn ito_identity_residual<G, DG>(
    g: G,
    dg: DG,
    horizon: f64,
    driver: &BrownianPath,
    g_sup: f64,
    dg_sup: f64,
) -> ItoResidual
where
    G: Fn(f64) -> f64,
    DG: Fn(f64) -> f64,
{
    let grid = driver.grid();
    let sqrt_t = horizon.sqrt();
    let lhs = osc_prefix(&g, sqrt_t, driver);
    let dlhs = osc_prefix(&dg, sqrt_t, driver);

    let mut sup_residual: f64 = 0.0;
    let mut sup_remainder: f64 = 0.0;
    let mut ito = Vector2::zeros();
    let g0 = Vector2::new(g(0.0), 0.0);
    for i in 0..grid.len() {
        let phase = unit_vector(sqrt_t * driver.value(i));
        let remainder = (2.0 / sqrt_t) * (g0 - g(grid.node(i)) * phase + dlhs[i]);
        let residual = sqrt_t * lhs[i] - 2.0 * quarter_turn(ito) - remainder;
        sup_residual = sup_residual.max(residual.norm());
        sup_remainder = sup_remainder.max(remainder.norm());
        if i < grid.steps() {
            let db = driver.value(i + 1) - driver.value(i);
            ito += g(grid.node(i)) * phase * db;
        }
    }
    ItoResidual {
        sup_residual,
        sup_remainder,
        remainder_bound: (4.0 * g_sup + 2.0 * dg_sup) / sqrt_t,
    }
}

/// One row of a law-of-large-numbers probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlnDeviation {
    pub lambda: f64,
    /// Mean over paths of `sup_t |int_0^t g f(lambda B) ds - mean(f) int_0^t g ds|`.
    pub mean: f64,
    pub stderr: f64,
    pub paths: u64,
}

/// Circle average `(1/2pi) int_0^{2pi} f` by trapezoid (spectrally accurate
/// for periodic `f`).
pub fn circle_average<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = 4096;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    (0..n).map(|i| f(i as f64 * h)).sum::<f64>() / n as f64
}

/// For each `lambda`, the empirical mean of the sup-deviation of
/// `int_0^t g(s) f(lambda B_s) ds` from `mean(f) int_0^t g(s) ds` over unit-
/// interval drivers of `steps(lambda)` steps.
pub fn lln_probe<F, G, S>(
    f: F,
    g: G,
    lambdas: &[f64],
    steps: S,
    paths: u64,
    seed: SeedSpec,
) -> Result<Vec<LlnDeviation>>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
    S: Fn(f64) -> usize,
{
    let f_bar = circle_average(&f);
    let mut out = Vec::with_capacity(lambdas.len());
    for (j, &lambda) in lambdas.iter().enumerate() {
        let grid = TimeGrid::unit(steps(lambda))?;
        let dt = grid.dt();
        let stats = replicate_map(0, paths, |i| {
            let driver = sample_increments(grid, seed.with_stream(i + ((j as u64) << 32)));
            let mut sup: f64 = 0.0;
            let mut acc = 0.0;
            let mut g_acc = 0.0;
            let mut prev = g(0.0) * f(lambda * driver.value(0));
            let mut g_prev = g(0.0);
            for k in 1..grid.len() {
                let s = grid.node(k);
                let cur = g(s) * f(lambda * driver.value(k));
                let g_cur = g(s);
                acc += 0.5 * dt * (prev + cur);
                g_acc += 0.5 * dt * (g_prev + g_cur);
                prev = cur;
                g_prev = g_cur;
                sup = sup.max((acc - f_bar * g_acc).abs());
            }
            let mut stat = RunningStat::new();
            stat.push(sup);
            stat
        });
        let merged = mc_reduce(stats)?;
        out.push(LlnDeviation { lambda, mean: merged.mean(), stderr: merged.std_err(), paths });
    }
    Ok(out)
}

/// Empirical tail of the oscillation functional
/// `J(theta, t) = t^{-1/2} int_0^t sin(theta + B_s) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailProfile {
    pub thresholds: Vec<f64>,
    /// `P(|J| > x)` per threshold.
    pub exceedance: Vec<f64>,
    /// Binomial standard errors.
    pub stderr: Vec<f64>,
    /// Least-squares slope of `log P` against `x^2` over thresholds with
    /// positive exceedance; negative for sub-Gaussian tails.
    pub fitted_slope: f64,
    pub paths: u64,
}

/// Estimate exceedance probabilities of `|J(theta, t)|` and fit a
/// sub-Gaussian log-tail slope.
pub fn subgaussian_tail_probe(
    theta: f64,
    t: f64,
    steps: usize,
    paths: u64,
    thresholds: &[f64],
    seed: SeedSpec,
) -> Result<TailProfile> {
    if t < 1.0 {
        return Err(KbmError::Domain(format!("tail probe needs t >= 1, got {t}")));
    }
    let grid = TimeGrid::new(t, steps)?;
    let dt = grid.dt();
    let js = replicate_map(0, paths, |i| {
        let driver = sample_increments(grid, seed.with_stream(i));
        let mut acc = 0.0;
        let mut prev = (theta + driver.value(0)).sin();
        for &b in &driver.values()[1..] {
            let cur = (theta + b).sin();
            acc += 0.5 * dt * (prev + cur);
            prev = cur;
        }
        (acc / t.sqrt()).abs()
    });
    let n = paths as f64;
    let mut exceedance = Vec::with_capacity(thresholds.len());
    let mut stderr = Vec::with_capacity(thresholds.len());
    for &x in thresholds {
        let count = js.iter().filter(|&&j| j > x).count() as f64;
        let p = count / n;
        exceedance.push(p);
        stderr.push((p * (1.0 - p) / n).sqrt());
    }
    // Slope of log P vs x^2 over strictly positive exceedance points.
    let pts: Vec<(f64, f64)> = thresholds
        .iter()
        .zip(&exceedance)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&x, &p)| (x * x, p.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(KbmError::DegenerateFit("fewer than 2 positive exceedance points".into()));
    }
    let fitted_slope = ols_slope(&pts);
    Ok(TailProfile {
        thresholds: thresholds.to_vec(),
        exceedance,
        stderr,
        fitted_slope,
        paths,
    })
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Closed form of `E |Z|^{-alpha}` for a standard normal `Z`:
/// `2^{-alpha/2} Gamma((1 - alpha) / 2) / sqrt(pi)`.
pub fn gaussian_negative_moment_closed_form(alpha: f64) -> f64 {
    2f64.powf(-alpha / 2.0) * gamma((1.0 - alpha) / 2.0) / std::f64::consts::PI.sqrt()
}

/// `E |a + B_t|^{-alpha}` for `alpha` in `(0, 1)` by adaptive quadrature.
///
/// The integrable singularity at the origin is removed by the substitution
/// `y = w^{1/(1-alpha)}`, after which adaptive Simpson integration applies.
pub fn negative_moment(alpha: f64, t: f64, a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(KbmError::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(KbmError::Domain(format!("t must be positive, got {t}")));
    }
    let c = a.abs() / t.sqrt();
    // E|a + B_t|^{-alpha} = t^{-alpha/2} E|c + Z|^{-alpha}, and
    // E|c + Z|^{-alpha} = int_0^inf y^{-alpha} (phi(y - c) + phi(y + c)) dy
    //                   = (1/(1-alpha)) int_0^W (phi(w^p - c) + phi(w^p + c)) dw
    // with p = 1/(1-alpha).
    let p = 1.0 / (1.0 - alpha);
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |w: f64| {
        let y = w.powf(p);
        phi(y - c) + phi(y + c)
    };
    let w_max = (c + 12.0).powf(1.0 - alpha);
    let tol = 1e-12;
    let value = adaptive_simpson(&integrand, 0.0, w_max, tol, 40)?;
    Ok(t.powf(-alpha / 2.0) * value / (1.0 - alpha))
}

/// Table of `(a, E|a + B_t|^{-alpha})` along an `a`-grid.
pub fn negative_moment_monotonicity(alpha: f64, t: f64, a_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    a_grid.iter().map(|&a| Ok((a, negative_moment(alpha, t, a)?))).collect()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> std::result::Result<f64, f64> {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(delta.abs() / 15.0);
        }
        let l = recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1);
        let r = recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1);
        match (l, r) {
            (Ok(x), Ok(y)) => Ok(x + y),
            (Ok(_), Err(e)) | (Err(e), Ok(_)) => Err(e),
            (Err(x), Err(y)) => Err(x + y),
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, max_depth)
        .map_err(|achieved| KbmError::QuadratureNonConvergence { achieved, requested: tol })
}
