//! Stationary profile of the quadratic-confinement problem with `U(r) = r^2`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquilibriumProfile {
    pub mass: f64,
    pub center: Point,
}

impl EquilibriumProfile {
    fn height(&self) -> f64 {
        (self.mass / (2.0 * PI)).sqrt()
    }

    pub fn density(&self, x: Point) -> f64 {
        (self.height() - 0.25 * (x - self.center).norm_squared()).max(0.0)
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * (self.mass / (2.0 * PI)).powf(0.25)
    }

    /// `int rho^2`.
    pub fn internal_energy(&self) -> f64 {
        4.0 * PI / 3.0 * (self.mass / (2.0 * PI)).powf(1.5)
    }
}

/// Equilibrium density and its internal energy.
pub fn equilibrium_profile(mass: f64, center: Point) -> (EquilibriumProfile, f64) {
    let p = EquilibriumProfile { mass, center };
    (p, p.internal_energy())
}
