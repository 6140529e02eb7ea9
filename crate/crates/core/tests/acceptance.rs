//! End-to-end acceptance checks, one test per release criterion.
//!
//! Every test prints a single `criterion NN (<name>): pass|fail` line (visible
//! under `--nocapture`) and asserts the verdict, so `cargo test` is the gate.

use kbm_core::catalog::TestFunction;
use kbm_core::gradients::{
    coupling_experiment, gradient_cross_check, hitting_survival_exact, rate_fit,
};
use kbm_core::grid::{oscillation_steps, TimeGrid};
use kbm_core::kbm::{flow, Direction, KineticState};
use kbm_core::malliavin::{
    control_functions, control_functions_base, dual_basis_truncated, dual_explicit,
    inverse_moment_probe, malliavin_derivative, matrix_gram, matrix_reduced, renormalize,
    reproduction, sample_limit_g, sample_limit_n_resampled, solve_control, DEFAULT_FD_STEP,
};
use kbm_core::oscillate::{
    gaussian_negative_moment_closed_form, ito_identity_residual, lln_probe, negative_moment,
    negative_moment_monotonicity, osc_integral, subgaussian_tail_probe,
};
use kbm_core::paths::{
    path_from_coefficients, sample_increments, BrownianPath, GaussianCoefficients,
};
use kbm_core::plane::block_rotation;
use kbm_core::rng::SeedSpec;
use kbm_core::stats::{compare_moments, replicate_map, RunningStat};
use nalgebra::{Vector2, Vector3};

fn check(num: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {num:02} ({name}): {}", if pass { "pass" } else { "fail" });
    assert!(pass, "criterion {num:02} ({name}): {detail}");
}

fn origin() -> KineticState {
    KineticState::new(0.0, Vector2::zeros())
}

/// The Gram matrix of the control functions equals the reduced matrix built
/// from inverse tangent flows, pathwise to near machine precision.
#[test]
fn criterion_01_matrix_identity() {
    let grid = TimeGrid::new(4.0, 8192).unwrap();
    let gaps = replicate_map(0, 1000, |i| {
        let mut starts = SeedSpec::new(9101, i).rng();
        let start = KineticState::new(
            3.0 * starts.standard_normal(),
            Vector2::new(starts.standard_normal(), starts.standard_normal()),
        );
        let kp = flow(start, sample_increments(grid, SeedSpec::new(101, i)), false);
        let g = matrix_gram(&control_functions(&kp));
        let r = matrix_reduced(&kp);
        (g.matrix() - r.matrix()).norm() / g.matrix().norm()
    });
    let worst = gaps.into_iter().fold(0.0f64, f64::max);
    check(1, "matrix identity", worst <= 1e-10, format!("worst relative Frobenius gap {worst:.3e}"));
}

/// Conjugating the angle-0 matrix by the block rotation of the base angle
/// reproduces the matrix computed directly at that angle.
#[test]
fn criterion_02_rotation_covariance() {
    let grid = TimeGrid::new(4.0, 1024).unwrap();
    let gaps = replicate_map(0, 1000, |i| {
        let mut starts = SeedSpec::new(9102, i).rng();
        let u = 4.0 * starts.standard_normal();
        let driver = sample_increments(grid, SeedSpec::new(102, i));
        let at_u = flow(KineticState::new(u, Vector2::zeros()), driver.clone(), false);
        let at_zero = flow(origin(), driver, false);
        let cu = matrix_gram(&control_functions(&at_u));
        let c0 = matrix_gram(&control_functions(&at_zero));
        let rotated = block_rotation(u) * c0.matrix() * block_rotation(-u);
        (cu.matrix() - rotated).norm() / cu.matrix().norm()
    });
    let worst = gaps.into_iter().fold(0.0f64, f64::max);
    check(2, "rotation covariance", worst <= 1e-12, format!("worst relative gap {worst:.3e}"));
}

/// The solved control reproduces the direction under the Gram pairing and
/// cancels the transported direction through the Malliavin derivative.
#[test]
fn criterion_03_control_identities() {
    let grid = TimeGrid::new(4.0, 8192).unwrap();
    let residuals = replicate_map(0, 1000, |i| {
        let mut starts = SeedSpec::new(9103, i).rng();
        let u = 2.0 * starts.standard_normal();
        let kp =
            flow(KineticState::new(u, Vector2::zeros()), sample_increments(grid, SeedSpec::new(103, i)), false);
        let cf = control_functions(&kp);
        let m = matrix_gram(&cf);
        let mut worst_repro = 0.0f64;
        let mut worst_flow = 0.0f64;
        for v in [Direction::horizontal(), Direction::vertical()] {
            let sol = solve_control(&m, &cf, &v).expect("Brownian paths are nondegenerate");
            worst_repro = worst_repro.max((reproduction(&cf, &sol.values) + v.as_vector()).norm());
            let jv = kp.tangent(grid.steps()).apply(&v);
            let dx = malliavin_derivative(&kp, &sol.values);
            worst_flow = worst_flow.max(jv.add(&dx).norm());
        }
        (worst_repro, worst_flow)
    });
    let (repro, flow_res) = residuals
        .into_iter()
        .fold((0.0f64, 0.0f64), |acc, r| (acc.0.max(r.0), acc.1.max(r.1)));
    check(
        3,
        "control identities",
        repro <= 1e-10 && flow_res <= 1e-9,
        format!("reproduction residual {repro:.3e}, flow identity residual {flow_res:.3e}"),
    );
}

/// The dual-weight gradient agrees with the common-random-numbers central
/// difference on the whole catalog, both directions, at several horizons.
/// The finite-difference bias is bounded by a step-halving run on the same
/// paths: halving the step removes 3/4 of the quadratic bias, so 4/3 of the
/// observed shift bounds the remaining one. The per-row threshold of 3.5
/// standard errors keeps the familywise false-alarm rate of the 36
/// simultaneous comparisons near the single-test 3-sigma level.
#[test]
fn criterion_04_ibp_matches_fd() {
    let x = KineticState::new(0.4, Vector2::new(0.1, -0.2));
    let paths = 100_000;
    let mut pass = true;
    let mut detail = String::new();
    for t in [2.0f64, 4.0, 8.0] {
        let grid = TimeGrid::new(t, (256.0 * t) as usize).unwrap();
        let seed = SeedSpec::new(104, 0);
        let rows = gradient_cross_check(x, grid, paths, 0, seed, 1e-3).unwrap();
        let halved = gradient_cross_check(x, grid, paths, 0, seed, 5e-4).unwrap();
        for (r, rh) in rows.iter().zip(&halved) {
            let bias = 4.0 / 3.0 * (r.diff_mean - rh.diff_mean).abs() + 1e-6;
            if !r.consistent(3.5, bias) {
                pass = false;
                detail.push_str(&format!(
                    "T = {t}, {} {}: diff {:.3e} +- {:.3e} (bias allowance {bias:.3e}); ",
                    r.function.name(),
                    if r.vertical { "vertical" } else { "horizontal" },
                    r.diff_mean,
                    r.diff_stderr,
                ));
            }
        }
    }
    check(4, "ibp vs fd", pass, detail);
}

/// The explicit dual agrees with the basis-truncated divergence oracle on
/// most paths, and the truncation error shrinks as the mode count doubles.
#[test]
fn criterion_05_dual_cross_check() {
    let grid = TimeGrid::new(4.0, 8192).unwrap();
    let v = Direction::vertical();
    let paths = 100u64;
    let truncations = [16usize, 32, 64];
    let gaps = replicate_map(0, paths, |i| {
        let xi = GaussianCoefficients::sample(64, SeedSpec::new(105, i));
        let driver = path_from_coefficients(grid, &xi);
        let kp = flow(origin(), driver, false);
        let exact = dual_explicit(&kp).unwrap().delta(&v);
        truncations.map(|k| {
            let short = GaussianCoefficients::from_values(xi.values()[..=k].to_vec());
            let td = dual_basis_truncated(&short, grid, 0.0, &v, DEFAULT_FD_STEP).unwrap();
            (td.value - exact).abs() / exact.abs()
        })
    });
    let close = gaps.iter().filter(|g| g[2] <= 0.05).count();
    let mean_gap: Vec<f64> = (0..truncations.len())
        .map(|j| gaps.iter().map(|g| g[j]).sum::<f64>() / paths as f64)
        .collect();
    let monotone = mean_gap[0] > mean_gap[1] && mean_gap[1] > mean_gap[2];
    check(
        5,
        "dual cross-check",
        close >= 90 && monotone,
        format!("{close}/100 paths within 5% at K = 64; mean gaps {mean_gap:?}"),
    );
}

/// The second moment of the rescaled oscillating integral matches its closed
/// form `4 - (8/T)(1 - e^{-T/2})` at several oscillation strengths.
#[test]
fn criterion_06_oscillating_second_moment() {
    let mut pass = true;
    let mut detail = String::new();
    for t in [25.0f64, 100.0, 400.0] {
        let lambda = t.sqrt();
        let grid = TimeGrid::unit(oscillation_steps(lambda)).unwrap();
        let stats = replicate_map(0, 10_000, |i| {
            let driver = sample_increments(grid, SeedSpec::new(106, i));
            let value = osc_integral(|_| 1.0, lambda, &driver, 1.0).unwrap();
            let mut s = RunningStat::new();
            s.push(t * value.norm_squared());
            s
        });
        let est = kbm_core::stats::mc_reduce(stats).unwrap().to_estimate(SeedSpec::new(106, 0));
        let target = 4.0 - 8.0 / t * (1.0 - (-t / 2.0).exp());
        if !est.within_sigma(target, 3.0) {
            pass = false;
            detail.push_str(&format!("T = {t}: mean {:.4} +- {:.4} vs {target:.4}; ", est.mean, est.stderr));
        }
    }
    check(6, "oscillating second moment", pass, detail);
}

/// The Ito rearrangement of the oscillating integral: the discretization
/// residual vanishes with measured order at least 0.4 in the step size, and
/// the closed-form remainder never exceeds its a priori bound.
#[test]
fn criterion_07_ito_identity() {
    fn g_one(_: f64) -> f64 {
        1.0
    }
    fn dg_one(_: f64) -> f64 {
        0.0
    }
    fn g_lin(s: f64) -> f64 {
        s
    }
    fn dg_lin(_: f64) -> f64 {
        1.0
    }
    fn g_sin(s: f64) -> f64 {
        (2.0 * std::f64::consts::PI * s).sin()
    }
    fn dg_sin(s: f64) -> f64 {
        2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * s).cos()
    }
    type Weight = (fn(f64) -> f64, fn(f64) -> f64, f64, f64, &'static str);
    let weights: [Weight; 3] = [
        (g_one, dg_one, 1.0, 0.0, "1"),
        (g_lin, dg_lin, 1.0, 1.0, "s"),
        (g_sin, dg_sin, 1.0, 2.0 * std::f64::consts::PI, "sin(2 pi s)"),
    ];

    let horizon = 25.0;
    let fine_steps = 16384usize;
    let strides = [8usize, 4, 2, 1];
    let paths = 12u64;
    let mut bound_ok = true;
    let mut sums = [[0.0f64; 4]; 3];
    for p in 0..paths {
        let driver = sample_increments(TimeGrid::unit(fine_steps).unwrap(), SeedSpec::new(107, p));
        for (si, &stride) in strides.iter().enumerate() {
            let n = fine_steps / stride;
            let values: Vec<f64> = (0..=n).map(|j| driver.value(j * stride)).collect();
            let sub = BrownianPath::from_values(TimeGrid::unit(n).unwrap(), values).unwrap();
            for (gi, (g, dg, g_sup, dg_sup, _)) in weights.iter().enumerate() {
                let res = ito_identity_residual(g, dg, horizon, &sub, *g_sup, *dg_sup);
                sums[gi][si] += res.sup_residual * res.sup_residual;
                if res.sup_remainder > res.remainder_bound + 1e-9 {
                    bound_ok = false;
                }
            }
        }
    }
    let dts: Vec<f64> = strides.iter().map(|&s| s as f64 / fine_steps as f64).collect();
    let mut pass = bound_ok;
    let mut detail = if bound_ok { String::new() } else { "remainder bound violated; ".into() };
    for (gi, (.., name)) in weights.iter().enumerate() {
        let rms: Vec<f64> = sums[gi].iter().map(|s| (s / paths as f64).sqrt()).collect();
        let fit = rate_fit(&dts, &rms).unwrap();
        if fit.slope < 0.4 {
            pass = false;
            detail.push_str(&format!("g = {name}: order {:.3} < 0.4; ", fit.slope));
        }
    }
    check(7, "ito identity", pass, detail);
}

/// Moments of the renormalized matrix at a large horizon match the limit
/// sampler's, within 3 combined standard errors plus a bias allowance read
/// off a horizon-refinement run (the T to 4T gap equals the remaining
/// square-root-rate bias of the finer horizon).
#[test]
fn criterion_08_matrix_limit_law() {
    let paths = 1500u64;
    let gather = |t: f64, seed: u64| -> Vec<[f64; 6]> {
        let grid = TimeGrid::new(t, oscillation_steps(t.sqrt())).unwrap();
        replicate_map(0, paths, move |i| {
            let kp = flow(origin(), sample_increments(grid, SeedSpec::new(seed, i)), false);
            let c = renormalize(&matrix_gram(&control_functions_base(&kp)));
            [c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 1)], c[(1, 2)], c[(2, 2)]]
        })
    };
    let fine = gather(4096.0, 108);
    let coarse = gather(1024.0, 1108);
    let limit: Vec<[f64; 6]> = replicate_map(0, paths, |i| {
        let g = sample_limit_g(4096, SeedSpec::new(2108, i)).unwrap();
        [g[(0, 0)], g[(0, 1)], g[(0, 2)], g[(1, 1)], g[(1, 2)], g[(2, 2)]]
    });

    let corner_mean = fine.iter().map(|r| r[0]).sum::<f64>() / paths as f64;
    let mut pass = (corner_mean - 1.0).abs() <= 1e-12;
    let mut detail =
        if pass { String::new() } else { format!("corner mean {corner_mean} off 1; ") };
    for e in 0..6 {
        let a: Vec<f64> = fine.iter().map(|r| r[e]).collect();
        let c: Vec<f64> = coarse.iter().map(|r| r[e]).collect();
        let l: Vec<f64> = limit.iter().map(|r| r[e]).collect();
        let refine = compare_moments(&c, &a, &[1, 2], SeedSpec::new(3108, e as u64)).unwrap();
        let rows = compare_moments(&a, &l, &[1, 2], SeedSpec::new(4108, e as u64)).unwrap();
        for (row, gap) in rows.iter().zip(&refine) {
            let allowance = gap.difference.abs() + 3.0 * gap.combined_stderr;
            if !row.within_sigma(3.0, allowance) {
                pass = false;
                detail.push_str(&format!(
                    "entry {e} order {}: diff {:.4} +- {:.4}, allowance {allowance:.4}; ",
                    row.order, row.difference, row.combined_stderr
                ));
            }
        }
    }
    check(8, "matrix limit law", pass, detail);
}

/// Second inverse moments of the renormalized matrix stay finite and stable
/// across horizons, with a negligible singular-path rate. The scan starts at
/// a moderate horizon: the uniform-in-time bound kicks in only once the
/// renormalized matrix is past its small-time degeneracy, where the moment
/// is finite but orders of magnitude above its limit value.
#[test]
fn criterion_09_inverse_moment_stability() {
    let paths = 10_000u64;
    let rows = inverse_moment_probe(
        &[32.0, 128.0, 512.0, 2048.0],
        &[2.0],
        |t| oscillation_steps(t.sqrt()),
        paths,
        0,
        SeedSpec::new(109, 0),
    )
    .unwrap();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let finite = means.iter().all(|m| m.is_finite() && *m > 0.0);
    let spread = means.iter().cloned().fold(f64::MIN, f64::max)
        / means.iter().cloned().fold(f64::MAX, f64::min);
    let singular_ok = rows.iter().all(|r| (r.singular as f64) < 1e-3 * r.paths as f64);
    check(
        9,
        "inverse-moment stability",
        finite && spread <= 10.0 && singular_ok,
        format!("means {means:?}, spread {spread:.2}"),
    );
}

/// The dual norm decays at the square-root rate in the vertical direction
/// and stays flat in the horizontal one, and the renormalized weight row at
/// a large horizon matches the limit sampler's second moments.
#[test]
fn criterion_10_dual_scaling() {
    let horizons = [64.0f64, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0];
    let paths = 1500u64;
    let mut vertical = Vec::new();
    let mut horizontal = Vec::new();
    let mut rows_large: Vec<Vector3<f64>> = Vec::new();
    for &t in &horizons {
        let grid = TimeGrid::new(t, oscillation_steps(t.sqrt())).unwrap();
        let per = replicate_map(0, paths, |i| {
            let kp = flow(origin(), sample_increments(grid, SeedSpec::new(110, i)), false);
            dual_explicit(&kp).ok().map(|d| {
                (
                    d.delta(&Direction::vertical()).powi(2),
                    d.delta(&Direction::horizontal()).powi(2),
                    d.renormalized(),
                )
            })
        });
        let mut sv = RunningStat::new();
        let mut sh = RunningStat::new();
        let mut rows = Vec::new();
        for entry in per.into_iter().flatten() {
            sv.push(entry.0);
            sh.push(entry.1);
            rows.push(entry.2);
        }
        assert!(rows.len() as f64 >= 0.999 * paths as f64, "too many singular paths at T = {t}");
        vertical.push(sv.mean().sqrt());
        horizontal.push(sh.mean().sqrt());
        if t == 4096.0 {
            rows_large = rows;
        }
    }
    let fv = rate_fit(&horizons, &vertical).unwrap();
    let fh = rate_fit(&horizons, &horizontal).unwrap();
    let mut pass = (-0.6..=-0.4).contains(&fv.slope) && (-0.1..=0.1).contains(&fh.slope);
    let mut detail = format!("vertical slope {:.3}, horizontal slope {:.3}; ", fv.slope, fh.slope);

    let limit: Vec<Vector3<f64>> = replicate_map(0, 1000, |i| {
        sample_limit_n_resampled(512, 64, SeedSpec::new(1110, i), 16).unwrap().vector
    });
    for comp in 0..3 {
        let a: Vec<f64> = rows_large.iter().map(|r| r[comp]).collect();
        let b: Vec<f64> = limit.iter().map(|r| r[comp]).collect();
        let rows = compare_moments(&a, &b, &[2], SeedSpec::new(2110, comp as u64)).unwrap();
        if !rows[0].within_sigma(3.0, 0.0) {
            pass = false;
            detail.push_str(&format!(
                "component {comp} second moment: {:.4} vs {:.4} (+- {:.4}); ",
                rows[0].moment_a, rows[0].moment_b, rows[0].combined_stderr
            ));
        }
    }
    check(10, "dual scaling", pass, detail);
}

/// Laws of large numbers for circle averages along fast oscillations: the
/// squared sine deviates little at high frequency, and cosine deviations
/// shrink as the frequency grows.
#[test]
fn criterion_11_lln_probes() {
    let paths = 200u64;
    let sin2 = lln_probe(
        |x: f64| x.sin().powi(2),
        |_| 1.0,
        &[100.0],
        oscillation_steps,
        paths,
        SeedSpec::new(111, 0),
    )
    .unwrap();
    let mut pass = sin2[0].mean <= 0.05;
    let mut detail = format!("sin^2 deviation {:.4} at lambda = 100; ", sin2[0].mean);

    let cos = lln_probe(
        |x: f64| x.cos(),
        |_| 1.0,
        &[10.0, 30.0, 100.0],
        oscillation_steps,
        paths,
        SeedSpec::new(1111, 0),
    )
    .unwrap();
    for pair in cos.windows(2) {
        let gap = pair[0].mean - pair[1].mean;
        let se = (pair[0].stderr.powi(2) + pair[1].stderr.powi(2)).sqrt();
        if gap <= 3.0 * se {
            pass = false;
            detail.push_str(&format!(
                "cos deviation not decreasing: {:.4} -> {:.4} (se {se:.4}); ",
                pair[0].mean, pair[1].mean
            ));
        }
    }
    check(11, "lln probes", pass, detail);
}

/// Sub-Gaussian tails of the oscillation functional are stable across time
/// scales, and the Gaussian negative moment matches its closed form and is
/// monotone in the offset. The time scales start past the transient regime
/// in which the fitted slope is still steepening toward its plateau.
#[test]
fn criterion_12_tail_and_negative_moment() {
    let thresholds = [1.0, 1.5, 2.0, 2.5];
    let mut slopes = Vec::new();
    for t in [16.0f64, 64.0, 256.0] {
        let steps = ((64.0 * t) as usize).max(1024);
        let profile =
            subgaussian_tail_probe(0.3, t, steps, 40_000, &thresholds, SeedSpec::new(112, 0))
                .unwrap();
        slopes.push(profile.fitted_slope);
    }
    let all_negative = slopes.iter().all(|s| *s < 0.0);
    let spread = slopes.iter().map(|s| s.abs()).fold(f64::MIN, f64::max)
        / slopes.iter().map(|s| s.abs()).fold(f64::MAX, f64::min);
    let mut pass = all_negative && spread <= 2.0;
    let mut detail = format!("tail slopes {slopes:?} (spread {spread:.2}); ");

    for alpha in [0.25f64, 0.5, 0.75] {
        let gap =
            (negative_moment(alpha, 1.0, 0.0).unwrap() - gaussian_negative_moment_closed_form(alpha)).abs();
        if gap > 1e-6 {
            pass = false;
            detail.push_str(&format!("alpha = {alpha}: closed-form gap {gap:.2e}; "));
        }
    }
    let table =
        negative_moment_monotonicity(0.5, 1.0, &[0.0, 0.25, 0.5, 1.0, 2.0, 4.0]).unwrap();
    for pair in table.windows(2) {
        if pair[1].1 > pair[0].1 + 1e-12 {
            pass = false;
            detail.push_str(&format!("not monotone at a = {}; ", pair[1].0));
        }
    }
    check(12, "tails and negative moments", pass, detail);
}

/// Reflection coupling: the meeting-time law matches the exact hitting law,
/// the circle-mode semigroup difference decays at the gradient rate, and the
/// square-root survival envelope holds within statistical resolution.
#[test]
fn criterion_13_coupling() {
    // The envelope P(tau > T/2) <= 2 u0 / sqrt(pi T) is nearly saturated for
    // small u0, so the check must leave room for Monte Carlo noise.
    let envelope_ok = |report: &kbm_core::gradients::CouplingReport| {
        let bound = 2.0 * report.u0 / (std::f64::consts::PI * report.horizon).sqrt();
        report.survival_half.mean <= bound + 3.0 * report.survival_half.stderr
    };

    let line_grid = TimeGrid::new(2.0, 2048).unwrap();
    let line = coupling_experiment(
        TestFunction::SinU,
        0.1,
        line_grid,
        false,
        100_000,
        0,
        SeedSpec::new(113, 0),
    )
    .unwrap();
    let target = hitting_survival_exact(0.1, 2.0);
    let mut pass = line.survival.within_sigma(target, 3.0) && envelope_ok(&line);
    let mut detail =
        format!("line survival {:.4} +- {:.4} vs {target:.4}; ", line.survival.mean, line.survival.stderr);

    let horizons = [16.0f64, 64.0, 256.0, 1024.0];
    let u0 = 0.5;
    let mut stats = Vec::new();
    for &t in &horizons {
        let grid = TimeGrid::new(t, (16.0 * t) as usize).unwrap();
        let report =
            coupling_experiment(TestFunction::TanhZ2, u0, grid, true, 150_000, 0, SeedSpec::new(1113, 0))
                .unwrap();
        if !envelope_ok(&report) {
            pass = false;
            detail.push_str(&format!("envelope violated at T = {t}; "));
        }
        stats.push(report.delta_f.mean.abs() / (2.0 * u0));
    }
    match rate_fit(&horizons, &stats) {
        Ok(fit) => {
            if fit.slope > -0.4 {
                pass = false;
                detail.push_str(&format!("circle difference slope {:.3} > -0.4; ", fit.slope));
            } else {
                detail.push_str(&format!("circle difference slope {:.3}; ", fit.slope));
            }
        }
        Err(e) => {
            pass = false;
            detail.push_str(&format!("circle rate fit failed: {e}; "));
        }
    }
    check(13, "coupling", pass, detail);
}

/// Identical seeds give bitwise-identical results under 1, 4, and 16
/// workers, for both a replicate-map estimator and the coupling driver.
#[test]
fn criterion_14_reproducibility() {
    let x = KineticState::new(0.4, Vector2::new(0.1, -0.2));
    let grid = TimeGrid::new(2.0, 256).unwrap();
    let workers = [1usize, 4, 16];

    let cross: Vec<_> = workers
        .iter()
        .map(|&w| gradient_cross_check(x, grid, 2000, w, SeedSpec::new(114, 0), 1e-3).unwrap())
        .collect();
    let mut pass = true;
    for run in &cross[1..] {
        for (a, b) in cross[0].iter().zip(run) {
            pass &= a.fd.mean.to_bits() == b.fd.mean.to_bits()
                && a.fd.stderr.to_bits() == b.fd.stderr.to_bits()
                && a.ibp.mean.to_bits() == b.ibp.mean.to_bits()
                && a.ibp.stderr.to_bits() == b.ibp.stderr.to_bits()
                && a.diff_mean.to_bits() == b.diff_mean.to_bits()
                && a.diff_stderr.to_bits() == b.diff_stderr.to_bits();
        }
    }

    let coupled: Vec<_> = workers
        .iter()
        .map(|&w| {
            coupling_experiment(TestFunction::SinZ1, 0.3, grid, true, 2000, w, SeedSpec::new(1114, 0))
                .unwrap()
        })
        .collect();
    pass &= coupled[1..].iter().all(|r| *r == coupled[0]);
    check(14, "reproducibility", pass, "worker-count dependence detected".to_string());
}
