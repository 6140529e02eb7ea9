//! Fixed catalog of smooth test functions with analytic gradients and
//! generator actions.
//!
//! Every function comes with its gradient `(d_u f, d_{z1} f, d_{z2} f)` and
//! the closed form of `Lf` for the generator
//! `L = (1/2) d^2_u + cos(u) d_{z1} + sin(u) d_{z2}`, so Monte Carlo
//! estimators can be checked against exact targets.

use crate::kbm::KineticState;
use nalgebra::Vector3;

/// A test function on the state space `(u, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    /// `f = 1`.
    One,
    /// `f = sin(u)`.
    SinU,
    /// `f = cos(u)`.
    CosU,
    /// `f = sin(z_1)`.
    SinZ1,
    /// `f = exp(-|z|^2 / 2) cos(u)`.
    GaussCosU,
    /// `f = tanh(z_1)`.
    TanhZ1,
    /// `f = tanh(z_2)`. Bounded but outside the cross-check catalog; it is
    /// the observable of the reflection-coupling experiment, whose position
    /// offset lives entirely in the `z_2` component.
    TanhZ2,
    /// `f = z_1`. Unbounded; used only by the generator probe, not part of
    /// the bounded catalog.
    ZRe,
}

impl TestFunction {
    /// The six bounded catalog functions.
    pub fn catalog() -> [TestFunction; 6] {
        use TestFunction::*;
        [One, SinU, CosU, SinZ1, GaussCosU, TanhZ1]
    }

    pub fn name(&self) -> &'static str {
        use TestFunction::*;
        match self {
            One => "one",
            SinU => "sin_u",
            CosU => "cos_u",
            SinZ1 => "sin_z1",
            GaussCosU => "gauss_cos_u",
            TanhZ1 => "tanh_z1",
            TanhZ2 => "tanh_z2",
            ZRe => "z_re",
        }
    }

    /// Parse a catalog name as printed by [`TestFunction::name`].
    pub fn from_name(name: &str) -> Option<TestFunction> {
        use TestFunction::*;
        match name {
            "one" => Some(One),
            "sin_u" => Some(SinU),
            "cos_u" => Some(CosU),
            "sin_z1" => Some(SinZ1),
            "gauss_cos_u" => Some(GaussCosU),
            "tanh_z1" => Some(TanhZ1),
            "tanh_z2" => Some(TanhZ2),
            "z_re" => Some(ZRe),
            _ => None,
        }
    }

    pub fn eval(&self, x: &KineticState) -> f64 {
        use TestFunction::*;
        match self {
            One => 1.0,
            SinU => x.u.sin(),
            CosU => x.u.cos(),
            SinZ1 => x.z.x.sin(),
            GaussCosU => (-0.5 * x.z.norm_squared()).exp() * x.u.cos(),
            TanhZ1 => x.z.x.tanh(),
            TanhZ2 => x.z.y.tanh(),
            ZRe => x.z.x,
        }
    }

    /// Analytic gradient `(d_u f, d_{z1} f, d_{z2} f)`.
    pub fn gradient(&self, x: &KineticState) -> Vector3<f64> {
        use TestFunction::*;
        match self {
            One => Vector3::zeros(),
            SinU => Vector3::new(x.u.cos(), 0.0, 0.0),
            CosU => Vector3::new(-x.u.sin(), 0.0, 0.0),
            SinZ1 => Vector3::new(0.0, x.z.x.cos(), 0.0),
            GaussCosU => {
                let e = (-0.5 * x.z.norm_squared()).exp();
                Vector3::new(-e * x.u.sin(), -x.z.x * e * x.u.cos(), -x.z.y * e * x.u.cos())
            }
            TanhZ1 => {
                let sech2 = 1.0 - x.z.x.tanh().powi(2);
                Vector3::new(0.0, sech2, 0.0)
            }
            TanhZ2 => {
                let sech2 = 1.0 - x.z.y.tanh().powi(2);
                Vector3::new(0.0, 0.0, sech2)
            }
            ZRe => Vector3::new(0.0, 1.0, 0.0),
        }
    }

    /// Analytic `Lf(x)`.
    pub fn generator_action(&self, x: &KineticState) -> f64 {
        use TestFunction::*;
        match self {
            One => 0.0,
            SinU => -0.5 * x.u.sin(),
            CosU => -0.5 * x.u.cos(),
            SinZ1 => x.u.cos() * x.z.x.cos(),
            GaussCosU => {
                let e = (-0.5 * x.z.norm_squared()).exp();
                let c = x.u.cos();
                let s = x.u.sin();
                e * (-0.5 * c - x.z.x * c * c - x.z.y * s * c)
            }
            TanhZ1 => {
                let sech2 = 1.0 - x.z.x.tanh().powi(2);
                x.u.cos() * sech2
            }
            TanhZ2 => {
                let sech2 = 1.0 - x.z.y.tanh().powi(2);
                x.u.sin() * sech2
            }
            ZRe => x.u.cos(),
        }
    }
}
