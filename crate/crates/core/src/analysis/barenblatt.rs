//! Self-similar compactly supported solutions of the porous medium equation
//! in the plane and their Lagrangian flow.

use std::f64::consts::PI;

use serde::Serialize;

use super::AnalysisError;
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarenblattSpec {
    pub gamma: f64,
    pub c: f64,
    pub t0: f64,
    pub dimension: usize,
}

impl BarenblattSpec {
    pub fn new(gamma: f64, c: f64, t0: f64) -> Result<Self, AnalysisError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(AnalysisError::InvalidParameter(format!("gamma = {gamma}")));
        }
        if !(c > 0.0 && t0 > 0.0) {
            return Err(AnalysisError::InvalidParameter(format!("C = {c}, t0 = {t0}")));
        }
        Ok(Self { gamma, c, t0, dimension: 2 })
    }

    /// The standard test case `C = 1/3`, `t0 = 1/16`.
    pub fn standard(gamma: f64) -> Result<Self, AnalysisError> {
        Self::new(gamma, 1.0 / 3.0, 1.0 / 16.0)
    }

    pub fn alpha(&self) -> f64 {
        let d = self.dimension as f64;
        d / (d * (self.gamma - 1.0) + 2.0)
    }

    pub fn beta(&self) -> f64 {
        self.alpha() / self.dimension as f64
    }

    pub fn k(&self) -> f64 {
        self.beta() * (self.gamma - 1.0) / (2.0 * self.gamma)
    }

    pub fn density(&self, t: f64, x: Point) -> f64 {
        let inner = self.c * self.c - self.k() * t.powf(-2.0 * self.beta()) * x.norm_squared();
        if inner <= 0.0 {
            0.0
        } else {
            t.powf(-self.alpha()) * inner.powf(1.0 / (self.gamma - 1.0))
        }
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        self.c / self.k().sqrt() * t.powf(self.beta())
    }

    /// Exact flow `(t / t0)^beta x`.
    pub fn flow(&self, t: f64, x: Point) -> Point {
        x * (t / self.t0).powf(self.beta())
    }

    /// Mass inside the disk of radius `r` at time `t`.
    pub fn cumulative_mass(&self, t: f64, r: f64) -> f64 {
        let q = self.gamma / (self.gamma - 1.0);
        let scale = self.k() * t.powf(-2.0 * self.beta());
        let c2 = self.c * self.c;
        let u = (scale * r * r).min(c2);
        let prefactor = PI * t.powf(-self.alpha()) / scale;
        prefactor * (c2.powf(q) - (c2 - u).powf(q)) / q
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative_mass(self.t0, self.support_radius(self.t0))
    }
}
