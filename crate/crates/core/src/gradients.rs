//! Monte Carlo estimators for the semigroup and its spatial gradients:
//! plain averages, common-random-number finite differences, integration by
//! parts through the Malliavin dual, a mixed estimator for the angular
//! derivative, and a mirror-coupling experiment with exact hitting laws.

use crate::catalog::TestFunction;
use crate::error::{KbmError, Result};
use crate::grid::TimeGrid;
use crate::kbm::{flow, Direction, KineticState};
use crate::malliavin::dual_explicit;
use crate::paths::{sample_increments, BrownianPath};
use crate::plane::{quarter_turn, rotation, unit_vector};
use crate::rng::SeedSpec;
use crate::stats::{mc_reduce, replicate_map, Estimate, RunningStat};
use nalgebra::Vector2;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Largest tolerated fraction of guard-rejected paths in dual-weighted
/// estimators.
const SINGULAR_BUDGET: f64 = 1e-3;

/// Plain Monte Carlo estimate of `P_T f(x) = E[f(X_T)]`.
pub fn semigroup_mc(
    f: TestFunction,
    x: KineticState,
    grid: TimeGrid,
    circle: bool,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
) -> Result<Estimate> {
    let stats = replicate_map(threads, paths, |i| {
        let kp = flow(x, sample_increments(grid, seed.with_stream(i)), circle);
        let mut s = RunningStat::new();
        s.push(f.eval(&kp.endpoint()));
        s
    });
    Ok(mc_reduce(stats)?.to_estimate(seed))
}

/// Endpoint of the flow from `y` along a driver summarized by
/// `(B_T, E_T)`; the endpoint depends on the start only through them.
fn endpoint_from(y: &KineticState, b_t: f64, e_t: Vector2<f64>) -> KineticState {
    KineticState::new(y.u + b_t, y.z + rotation(y.u) * e_t)
}

/// Central finite-difference gradient `(d_x P_T f, v)` with common random
/// numbers: both perturbed endpoints reuse one driver per path.
pub fn grad_fd(
    f: TestFunction,
    x: KineticState,
    v: &Direction,
    grid: TimeGrid,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
    step: f64,
) -> Result<Estimate> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let v = *v;
    let stats = replicate_map(threads, paths, |i| {
        let kp = flow(x, sample_increments(grid, seed.with_stream(i)), false);
        let b_t = kp.driver().terminal();
        let e_t = *kp.phase_prefix().last().expect("nonempty grid");
        let plus = KineticState::new(x.u + step * v.angular, x.z + step * v.plane);
        let minus = KineticState::new(x.u - step * v.angular, x.z - step * v.plane);
        let mut s = RunningStat::new();
        s.push(
            (f.eval(&endpoint_from(&plus, b_t, e_t)) - f.eval(&endpoint_from(&minus, b_t, e_t)))
                / (2.0 * step),
        );
        s
    });
    Ok(mc_reduce(stats)?.to_estimate(seed))
}

/// Integration-by-parts gradient `(d_x P_T f, v) = E[f(X_T) (-delta h(v))]`
/// through the closed-form dual weight.
///
/// Guard-rejected paths are skipped; more than 0.1% of them fails the run.
pub fn grad_ibp(
    f: TestFunction,
    x: KineticState,
    v: &Direction,
    grid: TimeGrid,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
) -> Result<Estimate> {
    let v = *v;
    let values = replicate_map(threads, paths, |i| {
        let kp = flow(x, sample_increments(grid, seed.with_stream(i)), false);
        let dual = dual_explicit(&kp).ok()?;
        Some(-dual.delta(&v) * f.eval(&kp.endpoint()))
    });
    let mut stat = RunningStat::new();
    let mut singular = 0u64;
    for value in values {
        match value {
            Some(y) => stat.push(y),
            None => singular += 1,
        }
    }
    if stat.count() == 0 || singular as f64 > SINGULAR_BUDGET * paths as f64 {
        return Err(KbmError::TooManySingularPaths { failures: singular, total: paths });
    }
    Ok(stat.to_estimate(seed))
}

/// One row of the pathwise comparison between the two gradient routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheckRow {
    pub function: TestFunction,
    /// False for the angular direction `(1, 0, 0)`, true for `(0, 1, 0)`.
    pub vertical: bool,
    pub horizon: f64,
    pub fd: Estimate,
    pub ibp: Estimate,
    /// Per-path difference `fd - ibp`; common random numbers make its
    /// standard error much smaller than either estimator's.
    pub diff_mean: f64,
    pub diff_stderr: f64,
    pub singular: u64,
    pub paths: u64,
}

impl CrossCheckRow {
    /// Whether the two routes agree within `k` standard errors of the
    /// pathwise difference plus a finite-difference bias allowance.
    pub fn consistent(&self, k: f64, bias_allowance: f64) -> bool {
        self.diff_mean.abs() <= k * self.diff_stderr + bias_allowance
    }
}

/// Compare the finite-difference and integration-by-parts gradients for the
/// whole bounded catalog in both canonical directions, sharing one driver
/// and one dual evaluation per path.
pub fn gradient_cross_check(
    x: KineticState,
    grid: TimeGrid,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
    fd_step: f64,
) -> Result<Vec<CrossCheckRow>> {
    assert!(fd_step > 0.0, "finite-difference step must be positive");
    let catalog = TestFunction::catalog();
    let dirs = [Direction::horizontal(), Direction::vertical()];

    // Per path: (fd, ibp) for each of the 12 rows, or None when singular.
    let per_path = replicate_map(threads, paths, |i| -> Option<[(f64, f64); 12]> {
        let kp = flow(x, sample_increments(grid, seed.with_stream(i)), false);
        let dual = dual_explicit(&kp).ok()?;
        let end = kp.endpoint();
        let b_t = kp.driver().terminal();
        let e_t = *kp.phase_prefix().last().expect("nonempty grid");
        let mut out = [(0.0, 0.0); 12];
        for (d, v) in dirs.iter().enumerate() {
            let weight = -dual.delta(v);
            let plus = KineticState::new(x.u + fd_step * v.angular, x.z + fd_step * v.plane);
            let minus = KineticState::new(x.u - fd_step * v.angular, x.z - fd_step * v.plane);
            let end_plus = endpoint_from(&plus, b_t, e_t);
            let end_minus = endpoint_from(&minus, b_t, e_t);
            for (j, f) in catalog.iter().enumerate() {
                let fd = (f.eval(&end_plus) - f.eval(&end_minus)) / (2.0 * fd_step);
                out[d * catalog.len() + j] = (fd, weight * f.eval(&end));
            }
        }
        Some(out)
    });

    let mut fd_stats = vec![RunningStat::new(); 12];
    let mut ibp_stats = vec![RunningStat::new(); 12];
    let mut diff_stats = vec![RunningStat::new(); 12];
    let mut singular = 0u64;
    for row in per_path {
        match row {
            Some(values) => {
                for (k, (fd, ibp)) in values.into_iter().enumerate() {
                    fd_stats[k].push(fd);
                    ibp_stats[k].push(ibp);
                    diff_stats[k].push(fd - ibp);
                }
            }
            None => singular += 1,
        }
    }
    if singular as f64 > SINGULAR_BUDGET * paths as f64 || fd_stats[0].count() == 0 {
        return Err(KbmError::TooManySingularPaths { failures: singular, total: paths });
    }

    let mut rows = Vec::with_capacity(12);
    for (d, _) in dirs.iter().enumerate() {
        for (j, &f) in catalog.iter().enumerate() {
            let k = d * catalog.len() + j;
            rows.push(CrossCheckRow {
                function: f,
                vertical: d == 1,
                horizon: grid.horizon(),
                fd: fd_stats[k].to_estimate(seed),
                ibp: ibp_stats[k].to_estimate(seed),
                diff_mean: diff_stats[k].mean(),
                diff_stderr: diff_stats[k].std_err(),
                singular,
                paths,
            });
        }
    }
    Ok(rows)
}

/// Mixed estimator of the angular derivative `(d_x P_T f, (1, 0, 0))`:
/// a score term `(B_lambda / lambda) f(X_T)` for the angle plus an
/// integration-by-parts term on the time interval `[lambda, T]` for the
/// position the angle has already dragged along, with direction
/// `(0, i e^{iu} int_0^lambda (1 - s / lambda) e^{iB_s} ds)`.
///
/// `lambda` is snapped to the nearest interior grid node.
pub fn grad_mixed_horizontal(
    f: TestFunction,
    x: KineticState,
    grid: TimeGrid,
    lambda: f64,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
) -> Result<Estimate> {
    let n = grid.steps();
    let dt = grid.dt();
    if !(lambda > 0.0 && lambda < grid.horizon()) {
        return Err(KbmError::Domain(format!(
            "lambda = {lambda} outside (0, {})",
            grid.horizon()
        )));
    }
    let i_lambda = ((lambda / dt).round() as usize).clamp(1, n - 2);
    let lambda_snapped = grid.node(i_lambda);
    let tail_grid = TimeGrid::new(grid.horizon() - lambda_snapped, n - i_lambda)?;

    let values = replicate_map(threads, paths, |i| {
        let kp = flow(x, sample_increments(grid, seed.with_stream(i)), false);
        let end = kp.endpoint();
        let score = kp.driver().value(i_lambda) / lambda_snapped * f.eval(&end);

        // Restart at X_lambda with the shifted driver.
        let b_lambda = kp.driver().value(i_lambda);
        let tail_values: Vec<f64> =
            (i_lambda..=n).map(|j| kp.driver().value(j) - b_lambda).collect();
        let tail_driver =
            BrownianPath::from_values(tail_grid, tail_values).expect("shifted driver is valid");
        let restart = flow(kp.state(i_lambda), tail_driver, false);

        // Triangular-weight direction accumulated over [0, lambda].
        let mut carried = Vector2::zeros();
        for j in 0..=i_lambda {
            let w = if j == 0 || j == i_lambda { 0.5 * dt } else { dt };
            carried +=
                w * (1.0 - grid.node(j) / lambda_snapped) * unit_vector(kp.driver().value(j));
        }
        let v = Direction::new(0.0, quarter_turn(rotation(x.u) * carried));

        let dual = dual_explicit(&restart).ok()?;
        Some(score - dual.delta(&v) * f.eval(&end))
    });

    let mut stat = RunningStat::new();
    let mut singular = 0u64;
    for value in values {
        match value {
            Some(y) => stat.push(y),
            None => singular += 1,
        }
    }
    if stat.count() == 0 || singular as f64 > SINGULAR_BUDGET * paths as f64 {
        return Err(KbmError::TooManySingularPaths { failures: singular, total: paths });
    }
    Ok(stat.to_estimate(seed))
}

/// Exact survival law of the coupling time: for a Brownian motion from
/// `u0 > 0`, `P(tau_0 > t) = erf(u0 / sqrt(2 t))`.
pub fn hitting_survival_exact(u0: f64, t: f64) -> f64 {
    statrs::function::erf::erf(u0 / (2.0 * t).sqrt())
}

/// Summary of a mirror-coupling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingReport {
    pub horizon: f64,
    pub u0: f64,
    pub circle: bool,
    pub paths: u64,
    /// `P(tau > T)`: the pair is still uncoupled at the horizon.
    pub survival: Estimate,
    /// `P(tau > T / 2)`.
    pub survival_half: Estimate,
    /// `E[f(X_T) - f(X~_T)]`.
    pub delta_f: Estimate,
    /// `E[min(tau, T)]`; converges to `E[tau]` once survival is negligible.
    pub mean_tau: Estimate,
    /// Fraction of paths whose coupling happened at the angle `pi` barrier
    /// (circle mode only; zero on the line).
    pub exit_pi: Estimate,
}

/// Run the mirror coupling: one copy follows `u0 + B`, the other `-(u0 + B)`
/// until the angle hits 0 (line) or {0, pi} (circle), after which the copies
/// coincide in angle and keep a frozen position offset
/// `2 i int_0^tau sin(u0 + B)`.
///
/// Within-step barrier crossings are detected by the exact Brownian-bridge
/// crossing probability, so the hitting law is sampled without the
/// first-order discretization bias of node-only checks.
pub fn coupling_experiment(
    f: TestFunction,
    u0: f64,
    grid: TimeGrid,
    circle: bool,
    paths: u64,
    threads: usize,
    seed: SeedSpec,
) -> Result<CouplingReport> {
    let upper = if circle { std::f64::consts::PI } else { f64::INFINITY };
    if !(u0 > 0.0 && u0 < upper) {
        return Err(KbmError::Domain(format!("u0 = {u0} outside the coupling strip")));
    }
    let n = grid.steps();
    let dt = grid.dt();
    let horizon = grid.horizon();

    struct PathOutcome {
        tau: Option<f64>,
        at_pi: bool,
        delta_f: f64,
    }

    let per_path = replicate_map(threads, paths, |i| {
        let mut rng = seed.with_stream(i).rng();
        let sqrt_dt = dt.sqrt();
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut b = 0.0;
        for _ in 0..n {
            b += sqrt_dt * rng.standard_normal();
            values.push(b);
        }

        // Walk the angle u = u0 + B, testing each step for a barrier
        // crossing; uniforms for the bridge test come from the same stream.
        let mut tau: Option<f64> = None;
        let mut tau_index = n;
        let mut at_pi = false;
        for j in 0..n {
            let (a, c) = (u0 + values[j], u0 + values[j + 1]);
            let crossed_zero = c <= 0.0;
            let crossed_pi = circle && c >= std::f64::consts::PI;
            let (hit, pi_side) = if crossed_zero || crossed_pi {
                // On a node-level exit, attribute the hit to the nearer side
                // when both are formally crossed (essentially impossible on
                // fine grids).
                (true, crossed_pi && !crossed_zero)
            } else {
                let p_zero = (-2.0 * a * c / dt).exp();
                let p_pi = if circle {
                    (-2.0 * (std::f64::consts::PI - a) * (std::f64::consts::PI - c) / dt).exp()
                } else {
                    0.0
                };
                if rng.uniform() < p_zero.max(p_pi) {
                    (true, p_pi > p_zero)
                } else {
                    (false, false)
                }
            };
            if hit {
                tau = Some(grid.node(j + 1));
                tau_index = j + 1;
                at_pi = pi_side;
                break;
            }
        }

        // Position offset frozen at the coupling time, and both endpoints.
        let mut offset = Vector2::zeros();
        let mut z = Vector2::zeros();
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 * dt } else { dt };
            let e = unit_vector(u0 + values[j]);
            z += w * e;
            if j <= tau_index {
                let wo = if j == 0 || j == tau_index { 0.5 * dt } else { dt };
                // 2 i sin(u) = (0, 2 sin u) as a plane vector.
                offset += wo * Vector2::new(0.0, 2.0 * e.y);
            }
        }
        let u_end = u0 + values[n];
        let end = KineticState::new(u_end, z);
        let mirrored_u = if tau.is_some() { u_end } else { -u_end };
        let mirror_end = KineticState::new(mirrored_u, z - offset);
        let (end, mirror_end) = if circle {
            (end.normalized(), mirror_end.normalized())
        } else {
            (end, mirror_end)
        };
        PathOutcome { tau, at_pi, delta_f: f.eval(&end) - f.eval(&mirror_end) }
    });

    let mut survival = RunningStat::new();
    let mut survival_half = RunningStat::new();
    let mut delta_f = RunningStat::new();
    let mut mean_tau = RunningStat::new();
    let mut exit_pi = RunningStat::new();
    for o in per_path {
        survival.push(if o.tau.is_none() { 1.0 } else { 0.0 });
        survival_half.push(match o.tau {
            Some(t) if t <= horizon / 2.0 => 0.0,
            _ => 1.0,
        });
        delta_f.push(o.delta_f);
        mean_tau.push(o.tau.unwrap_or(horizon));
        exit_pi.push(if o.at_pi { 1.0 } else { 0.0 });
    }
    Ok(CouplingReport {
        horizon,
        u0,
        circle,
        paths,
        survival: survival.to_estimate(seed),
        survival_half: survival_half.to_estimate(seed),
        delta_f: delta_f.to_estimate(seed),
        mean_tau: mean_tau.to_estimate(seed),
        exit_pi: exit_pi.to_estimate(seed),
    })
}

/// A fitted power law `value ~ intercept * horizon^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept_log: f64,
    pub slope_stderr: f64,
    /// Half-width of the 95% confidence interval for the slope.
    pub ci_halfwidth: f64,
}

impl RateFit {
    /// Whether `target` lies within the 95% confidence interval.
    pub fn covers(&self, target: f64) -> bool {
        (self.slope - target).abs() <= self.ci_halfwidth
    }
}

/// Least-squares fit of `log(value)` against `log(horizon)`.
///
/// Needs at least four points and strictly positive inputs; degenerate
/// designs raise [`KbmError::DegenerateFit`].
pub fn rate_fit(horizons: &[f64], values: &[f64]) -> Result<RateFit> {
    if horizons.len() != values.len() {
        return Err(KbmError::DegenerateFit(format!(
            "{} horizons vs {} values",
            horizons.len(),
            values.len()
        )));
    }
    let n = horizons.len();
    if n < 4 {
        return Err(KbmError::DegenerateFit(format!("need at least 4 points, got {n}")));
    }
    if horizons.iter().chain(values).any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(KbmError::DegenerateFit("inputs must be finite and positive".to_string()));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(KbmError::DegenerateFit("horizons are all equal".to_string()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept_log = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept_log - slope * x).powi(2))
        .sum();
    let df = (n - 2) as f64;
    let slope_stderr = (rss / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("valid dof").inverse_cdf(0.975);
    Ok(RateFit { slope, intercept_log, slope_stderr, ci_halfwidth: t * slope_stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn origin() -> KineticState {
        KineticState::new(0.4, Vector2::new(0.1, -0.2))
    }

    #[test]
    fn semigroup_of_the_constant_is_one() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let est =
            semigroup_mc(TestFunction::One, origin(), grid, false, 100, 0, SeedSpec::new(1, 0))
                .unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn semigroup_of_sin_u_matches_the_heat_factor() {
        // E[sin(u + B_T)] = sin(u) exp(-T / 2).
        let grid = TimeGrid::new(2.0, 128).unwrap();
        let x = origin();
        let est = semigroup_mc(TestFunction::SinU, x, grid, false, 40_000, 0, SeedSpec::new(2, 0))
            .unwrap();
        let target = x.u.sin() * (-1.0f64).exp();
        assert!(est.within_sigma(target, 3.0), "mean {} vs {target}", est.mean);
    }

    #[test]
    fn fd_gradient_of_sin_u_matches_the_closed_form() {
        // (d/du) E[sin(u + B_T)] = cos(u) exp(-T / 2), independent of z.
        let grid = TimeGrid::new(2.0, 128).unwrap();
        let x = origin();
        let est = grad_fd(
            TestFunction::SinU,
            x,
            &Direction::horizontal(),
            grid,
            40_000,
            0,
            SeedSpec::new(3, 0),
            1e-3,
        )
        .unwrap();
        let target = x.u.cos() * (-1.0f64).exp();
        assert!(est.within_sigma(target, 3.0), "mean {} vs {target}", est.mean);
    }

    #[test]
    fn fd_gradient_halving_the_step_is_stable() {
        let grid = TimeGrid::new(2.0, 128).unwrap();
        let run = |step: f64| {
            grad_fd(
                TestFunction::SinZ1,
                origin(),
                &Direction::vertical(),
                grid,
                5_000,
                0,
                SeedSpec::new(4, 0),
                step,
            )
            .unwrap()
        };
        let coarse = run(1e-2);
        let fine = run(5e-3);
        assert!((coarse.mean - fine.mean).abs() <= 1e-4 + 3.0 * (coarse.stderr + fine.stderr));
    }

    #[test]
    fn ibp_gradient_of_the_constant_is_mean_zero() {
        // -E[delta] = 0, so the constant's gradient estimator averages the
        // bare dual weight.
        let grid = TimeGrid::new(2.0, 512).unwrap();
        let est = grad_ibp(
            TestFunction::One,
            origin(),
            &Direction::vertical(),
            grid,
            4_000,
            0,
            SeedSpec::new(5, 0),
        )
        .unwrap();
        assert!(est.within_sigma(0.0, 3.0), "mean {} stderr {}", est.mean, est.stderr);
    }

    #[test]
    fn cross_check_rows_agree_for_a_smooth_function() {
        let grid = TimeGrid::new(2.0, 1024).unwrap();
        let rows =
            gradient_cross_check(origin(), grid, 4_000, 0, SeedSpec::new(6, 0), 1e-3).unwrap();
        assert_eq!(rows.len(), 12);
        for row in &rows {
            assert!(
                row.consistent(4.0, 1e-4),
                "{} vertical={}: diff {} +- {}",
                row.function.name(),
                row.vertical,
                row.diff_mean,
                row.diff_stderr
            );
        }
    }

    #[test]
    fn mixed_estimator_matches_the_fd_gradient() {
        let grid = TimeGrid::new(4.0, 1024).unwrap();
        let x = origin();
        let fd = grad_fd(
            TestFunction::CosU,
            x,
            &Direction::horizontal(),
            grid,
            30_000,
            0,
            SeedSpec::new(7, 0),
            1e-3,
        )
        .unwrap();
        let mixed = grad_mixed_horizontal(
            TestFunction::CosU,
            x,
            grid,
            grid.horizon().sqrt(),
            30_000,
            0,
            SeedSpec::new(7, 0),
        )
        .unwrap();
        let gap = (fd.mean - mixed.mean).abs();
        assert!(
            gap <= 1e-3 + 3.0 * (fd.stderr + mixed.stderr),
            "fd {} vs mixed {}",
            fd.mean,
            mixed.mean
        );
    }

    #[test]
    fn mixed_estimator_rejects_bad_split_times() {
        let grid = TimeGrid::new(4.0, 256).unwrap();
        for lambda in [0.0, -1.0, 4.0, 9.0] {
            assert!(matches!(
                grad_mixed_horizontal(
                    TestFunction::One,
                    origin(),
                    grid,
                    lambda,
                    10,
                    0,
                    SeedSpec::new(8, 0)
                ),
                Err(KbmError::Domain(_))
            ));
        }
    }

    #[test]
    fn exact_survival_law_values() {
        assert_relative_eq!(
            hitting_survival_exact(0.1, 2.0),
            statrs::function::erf::erf(0.05),
            epsilon = 1e-15
        );
        assert!(hitting_survival_exact(0.1, 1e6) < 1e-4);
        assert!(hitting_survival_exact(10.0, 0.01) > 0.999_999);
    }

    #[test]
    fn coupling_survival_matches_the_exact_law() {
        let grid = TimeGrid::new(2.0, 2048).unwrap();
        let report = coupling_experiment(
            TestFunction::SinU,
            0.1,
            grid,
            false,
            20_000,
            0,
            SeedSpec::new(9, 0),
        )
        .unwrap();
        let target = hitting_survival_exact(0.1, 2.0);
        assert!(
            report.survival.within_sigma(target, 3.0),
            "survival {} vs {target}",
            report.survival.mean
        );
        assert_eq!(report.exit_pi.mean, 0.0);
    }

    #[test]
    fn circle_coupling_time_and_exit_side() {
        // E[tau] = u0 (pi - u0) and P(exit at pi) = u0 / pi once survival
        // is negligible.
        let u0 = 0.8;
        let grid = TimeGrid::new(40.0, 8192).unwrap();
        let report = coupling_experiment(
            TestFunction::CosU,
            u0,
            grid,
            true,
            8_000,
            0,
            SeedSpec::new(10, 0),
        )
        .unwrap();
        assert!(report.survival.mean < 1e-3, "survival {}", report.survival.mean);
        let tau_target = u0 * (std::f64::consts::PI - u0);
        assert!(
            report.mean_tau.within_sigma(tau_target, 4.0),
            "mean tau {} vs {tau_target}",
            report.mean_tau.mean
        );
        let side_target = u0 / std::f64::consts::PI;
        assert!(
            report.exit_pi.within_sigma(side_target, 4.0),
            "exit fraction {} vs {side_target}",
            report.exit_pi.mean
        );
    }

    #[test]
    fn coupling_rejects_bad_start_angles() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        for (u0, circle) in [(0.0, false), (-0.5, false), (4.0, true)] {
            assert!(matches!(
                coupling_experiment(TestFunction::One, u0, grid, circle, 10, 0, SeedSpec::new(0, 0)),
                Err(KbmError::Domain(_))
            ));
        }
    }

    #[test]
    fn rate_fit_recovers_an_exact_power_law() {
        let horizons: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];
        let values: Vec<f64> = horizons.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let fit = rate_fit(&horizons, &values).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept_log, 3.0f64.ln(), epsilon = 1e-12);
        assert!(fit.covers(-0.5));
    }

    #[test]
    fn rate_fit_rejects_degenerate_inputs() {
        assert!(rate_fit(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(rate_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(rate_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, -1.0, 1.0, 1.0]).is_err());
        assert!(rate_fit(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
