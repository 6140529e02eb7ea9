//! Shared fixtures for the benchmark suite.

use kbm_core::kbm::{flow, KineticState, KineticPath};
use kbm_core::paths::sample_increments;
use kbm_core::{SeedSpec, TimeGrid};
use nalgebra::Vector2;

/// A driver-only kinetic path on a `steps`-point grid over horizon `t`.
pub fn fixture_path(t: f64, steps: usize, stream: u64) -> KineticPath {
    let grid = TimeGrid::new(t, steps).expect("valid bench grid");
    flow(
        KineticState::new(0.0, Vector2::zeros()),
        sample_increments(grid, SeedSpec::new(4242, stream)),
        false,
    )
}
