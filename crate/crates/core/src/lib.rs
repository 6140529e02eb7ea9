//! Kinetic Brownian motion on the plane, its Malliavin matrix and explicit
//! Malliavin dual, and Monte Carlo estimators of semigroup gradients built
//! from them.
//!
//! The state is a pair `(u, z)`: an angle `u` driven by a real Brownian
//! motion and a planar position `z` integrating the unit vector `e^{iu}`.
//! The crate provides
//!
//! - deterministic, seedable Brownian driver construction, by increments and
//!   by orthonormal-basis expansion ([`paths`]);
//! - the kinetic flow, its tangent flow and a generator consistency probe
//!   ([`kbm`]);
//! - oscillating stochastic integrals and the empirical probes of their
//!   limit behaviour ([`oscillate`]);
//! - the control problem, the Gram/reduced Malliavin matrix, the explicit
//!   dual and its basis-truncated oracle, and samplers for the large-time
//!   limit objects ([`malliavin`]);
//! - semigroup gradient estimation by finite differences, integration by
//!   parts, a mixed horizontal estimator and a reflection-coupling
//!   experiment ([`gradients`]);
//! - mergeable Monte Carlo statistics and bootstrap moment comparison
//!   ([`stats`]).
//!
//! All randomness flows through [`rng::SeedSpec`]: one counter-based
//! substream per replicate, so results are bit-identical regardless of the
//! number of workers.

pub mod catalog;
pub mod error;
pub mod gradients;
pub mod grid;
pub mod kbm;
pub mod malliavin;
pub mod oscillate;
pub mod paths;
pub mod plane;
pub mod rng;
pub mod stats;

pub use catalog::TestFunction;
pub use error::{KbmError, Result};
pub use grid::TimeGrid;
pub use kbm::{Direction, KineticPath, KineticState, TangentMatrix};
pub use malliavin::{ControlFunctions, ControlSolution, DualEvaluation, LimitSample, MalliavinMatrix};
pub use paths::{BrownianPath, GaussianCoefficients, Provenance};
pub use rng::SeedSpec;
pub use stats::{Estimate, RunningStat};
