//! Mergeable Monte Carlo statistics, bootstrap moment comparison, and a
//! deterministic parallel replicate driver.

use crate::error::{KbmError, Result};
use crate::rng::SeedSpec;
use rayon::prelude::*;

/// Sufficient statistics `(n, sum, sum of squares)` of a scalar sample.
///
/// Merging is associative and commutative, so reductions are independent of
/// scheduling.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStat {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl RunningStat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &RunningStat) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.std_dev() / (self.n as f64).sqrt()
        }
    }

    pub fn to_estimate(self, seed: SeedSpec) -> Estimate {
        Estimate { mean: self.mean(), stderr: self.std_err(), n: self.n, seed }
    }
}

/// A Monte Carlo estimate: mean, standard error, sample count, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: SeedSpec,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within_sigma(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Merge a stream of partial statistics; errors on an empty stream.
pub fn mc_reduce<I>(partials: I) -> Result<RunningStat>
where
    I: IntoIterator<Item = RunningStat>,
{
    let mut merged = RunningStat::new();
    let mut seen = false;
    for p in partials {
        merged.merge(&p);
        seen = true;
    }
    if !seen {
        return Err(KbmError::EmptyStream);
    }
    Ok(merged)
}

/// Evaluate `f(replicate_index)` for indices `0 .. n` on a pool of `threads`
/// workers (0 meaning rayon's default), collecting results in index order.
///
/// Replicates must derive all randomness from their index, which makes the
/// output independent of the worker count.
pub fn replicate_map<T, F>(threads: usize, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let run = || (0..n).into_par_iter().map(&f).collect();
    if threads == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction");
        pool.install(run)
    }
}

/// One row of a bootstrap moment comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentComparison {
    pub order: u32,
    pub moment_a: f64,
    pub moment_b: f64,
    /// `moment_a - moment_b`.
    pub difference: f64,
    /// Bootstrap standard error of the difference.
    pub combined_stderr: f64,
}

impl MomentComparison {
    pub fn within_sigma(&self, k: f64, allowance: f64) -> bool {
        self.difference.abs() <= k * self.combined_stderr + allowance
    }
}

/// Compare raw sample moments of two samples, with bootstrap standard errors
/// (default 1000 resamples via [`compare_moments`]).
pub fn compare_moments_with(
    a: &[f64],
    b: &[f64],
    orders: &[u32],
    resamples: usize,
    seed: SeedSpec,
) -> Result<Vec<MomentComparison>> {
    if a.is_empty() || b.is_empty() {
        return Err(KbmError::EmptyStream);
    }
    let mut out = Vec::with_capacity(orders.len());
    for (j, &order) in orders.iter().enumerate() {
        let ma = raw_moment(a, order);
        let mb = raw_moment(b, order);
        let sa = bootstrap_moment_se(a, order, resamples, seed.with_stream(seed.stream + 2 * j as u64));
        let sb = bootstrap_moment_se(b, order, resamples, seed.with_stream(seed.stream + 2 * j as u64 + 1));
        out.push(MomentComparison {
            order,
            moment_a: ma,
            moment_b: mb,
            difference: ma - mb,
            combined_stderr: (sa * sa + sb * sb).sqrt(),
        });
    }
    Ok(out)
}

/// [`compare_moments_with`] at the default 1000 resamples.
pub fn compare_moments(a: &[f64], b: &[f64], orders: &[u32], seed: SeedSpec) -> Result<Vec<MomentComparison>> {
    compare_moments_with(a, b, orders, 1000, seed)
}

fn raw_moment(xs: &[f64], order: u32) -> f64 {
    xs.iter().map(|&x| x.powi(order as i32)).sum::<f64>() / xs.len() as f64
}

fn bootstrap_moment_se(xs: &[f64], order: u32, resamples: usize, seed: SeedSpec) -> f64 {
    let mut rng = seed.rng();
    let n = xs.len();
    let mut stat = RunningStat::new();
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            let idx = (rng.uniform() * n as f64) as usize;
            sum += xs[idx.min(n - 1)].powi(order as i32);
        }
        stat.push(sum / n as f64);
    }
    stat.std_dev()
}
