//! Uniform time grids.

use crate::error::{KbmError, Result};

/// A uniform grid on `[0, T]` with nodes `t_i = i T / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    /// A grid with `steps >= 2` subintervals over a positive finite horizon.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(KbmError::Domain(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(KbmError::Domain(format!("grid needs at least 2 steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    /// A grid on the unit interval.
    pub fn unit(steps: usize) -> Result<Self> {
        Self::new(1.0, steps)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of subintervals `n`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Step size `T / n`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_i = i T / n`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.steps);
        self.horizon * i as f64 / self.steps as f64
    }

    /// Iterator over all nodes `t_0, ..., t_n`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.node(i))
    }

    /// The same number of steps over a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(horizon, self.steps)
    }
}

/// Step count resolving oscillations of `e^{i lambda B}` for a problem with
/// oscillation parameter `lambda = sqrt(T)`: at least 64 steps per unit of
/// `lambda^2`, floored at 4096, so the per-step phase increment has RMS
/// `lambda / sqrt(n) <= 1/8`.
pub fn oscillation_steps(lambda: f64) -> usize {
    let need = (64.0 * lambda * lambda).ceil();
    (need as usize).max(4096)
}
