//! Internal energies `U`, the associated pressure and cell costs, and
//! external potentials.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("negative density {0}")]
    NegativeDensity(f64),
    #[error("argument {0} outside the domain of the function")]
    DomainError(f64),
    #[error("pressure inverse of {0} could not be bracketed")]
    NoBracket(f64),
}

/// Growth constants `(R, alpha, beta)` with `U(r) - inf U >= beta r^alpha` for `r >= R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// A smooth strictly convex internal energy with `U(0) = 0` and superlinear
/// growth.
///
/// Only `u`, `u_prime` and `u_second` are required; pressure and its inverse
/// have generic implementations.
pub trait InternalEnergy: Send + Sync + fmt::Debug {
    fn u(&self, r: f64) -> f64;
    fn u_prime(&self, r: f64) -> f64;
    fn u_second(&self, r: f64) -> f64;

    /// `r U'(r) - U(r)`, and 0 at `r = 0`.
    fn pressure(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            r * self.u_prime(r) - self.u(r)
        }
    }

    fn pressure_derivative(&self, r: f64) -> f64 {
        r * self.u_second(r)
    }

    /// Inverse of the pressure, by bisection on a geometrically expanded bracket.
    fn pressure_inverse(&self, p: f64) -> Result<f64, EnergyError> {
        if p < 0.0 || p.is_nan() {
            return Err(EnergyError::DomainError(p));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let mut lo = 1e-16;
        let mut hi = p.max(10.0).powi(2);
        let mut expansions = 0;
        while self.pressure(lo) > p {
            lo *= 1e-4;
            expansions += 1;
            if expansions > 80 || lo == 0.0 {
                return Err(EnergyError::NoBracket(p));
            }
        }
        while self.pressure(hi) < p {
            hi *= 10.0;
            expansions += 1;
            if expansions > 80 || !hi.is_finite() {
                return Err(EnergyError::NoBracket(p));
            }
        }
        for _ in 0..400 {
            let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if self.pressure(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Exponent when the energy is a pure power law.
    fn exponent(&self) -> Option<f64> {
        None
    }

    fn growth(&self) -> Option<GrowthConstants> {
        None
    }

    fn name(&self) -> String;
}

/// `U(r) = r^gamma / (gamma - 1)`, with pressure `P(r) = r^gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw {
    gamma: f64,
}

impl PowerLaw {
    pub fn new(gamma: f64) -> Result<Self, EnergyError> {
        if gamma > 1.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(EnergyError::DomainError(gamma))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `r^e`, using exact multiplications and square roots for the small
/// integer and half-integer exponents that dominate in practice.
fn power(r: f64, e: f64) -> f64 {
    let twice = 2.0 * e;
    if twice.fract() == 0.0 && (0.0..=16.0).contains(&twice) {
        let whole = r.powi(e.floor() as i32);
        if e.fract() == 0.0 {
            whole
        } else {
            whole * r.sqrt()
        }
    } else {
        r.powf(e)
    }
}

/// `p^(1/gamma)` with exact roots for `gamma` in {2, 4}.
fn root(p: f64, gamma: f64) -> f64 {
    if gamma == 2.0 {
        p.sqrt()
    } else if gamma == 4.0 {
        p.sqrt().sqrt()
    } else {
        p.powf(1.0 / gamma)
    }
}

impl InternalEnergy for PowerLaw {
    fn u(&self, r: f64) -> f64 {
        power(r, self.gamma) / (self.gamma - 1.0)
    }

    fn u_prime(&self, r: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) * power(r, self.gamma - 1.0)
    }

    fn u_second(&self, r: f64) -> f64 {
        self.gamma * r.powf(self.gamma - 2.0)
    }

    fn pressure(&self, r: f64) -> f64 {
        power(r, self.gamma)
    }

    fn pressure_derivative(&self, r: f64) -> f64 {
        self.gamma * power(r, self.gamma - 1.0)
    }

    fn pressure_inverse(&self, p: f64) -> Result<f64, EnergyError> {
        if p < 0.0 || p.is_nan() {
            return Err(EnergyError::DomainError(p));
        }
        Ok(root(p, self.gamma))
    }

    fn exponent(&self) -> Option<f64> {
        Some(self.gamma)
    }

    fn growth(&self) -> Option<GrowthConstants> {
        Some(GrowthConstants { r: 1.0, alpha: self.gamma, beta: 1.0 / (self.gamma - 1.0) })
    }

    fn name(&self) -> String {
        format!("power(gamma={})", self.gamma)
    }
}

/// Shared handle on an internal energy, with the derived cell quantities.
#[derive(Clone, Debug)]
pub struct EnergyModel(Arc<dyn InternalEnergy>);

impl EnergyModel {
    pub fn new(energy: impl InternalEnergy + 'static) -> Self {
        Self(Arc::new(energy))
    }

    pub fn power(gamma: f64) -> Result<Self, EnergyError> {
        Ok(Self::new(PowerLaw::new(gamma)?))
    }

    /// Resolves a configuration family name.
    pub fn from_family(family: &str, gamma: f64) -> Result<Self, String> {
        match family {
            "power" => Self::power(gamma).map_err(|e| e.to_string()),
            other => Err(format!("unknown energy family {other:?}")),
        }
    }

    pub fn inner(&self) -> &dyn InternalEnergy {
        &*self.0
    }

    pub fn u(&self, r: f64) -> f64 {
        self.0.u(r)
    }

    pub fn u_prime(&self, r: f64) -> f64 {
        self.0.u_prime(r)
    }

    pub fn u_second(&self, r: f64) -> f64 {
        self.0.u_second(r)
    }

    pub fn exponent(&self) -> Option<f64> {
        self.0.exponent()
    }

    pub fn pressure(&self, r: f64) -> Result<f64, EnergyError> {
        if r < 0.0 || r.is_nan() {
            return Err(EnergyError::NegativeDensity(r));
        }
        Ok(self.0.pressure(r))
    }

    pub fn pressure_inverse(&self, p: f64) -> Result<f64, EnergyError> {
        self.0.pressure_inverse(p)
    }

    /// `(C*)'(s) = m / P^{-1}(-s)` for `s < 0`.
    pub fn cstar_prime(&self, mass: f64, s: f64) -> Result<f64, EnergyError> {
        if !(s < 0.0) {
            return Err(EnergyError::DomainError(s));
        }
        Ok(mass / self.0.pressure_inverse(-s)?)
    }

    /// `(C*)''(s) = m / (r^3 U''(r))` with `r = P^{-1}(-s)`.
    pub fn cstar_second(&self, mass: f64, s: f64) -> Result<f64, EnergyError> {
        if !(s < 0.0) {
            return Err(EnergyError::DomainError(s));
        }
        let r = self.0.pressure_inverse(-s)?;
        Ok(mass / (r * r * self.0.pressure_derivative(r)))
    }

    /// Convex conjugate of the cell cost, `+inf` for `s > 0`.
    pub fn cstar(&self, mass: f64, s: f64) -> f64 {
        if s > 0.0 {
            f64::INFINITY
        } else if s == 0.0 {
            -mass * self.0.u_prime(0.0)
        } else {
            match self.0.pressure_inverse(-s) {
                Ok(r) => -mass * self.0.u_prime(r),
                Err(_) => f64::NAN,
            }
        }
    }

    /// `C(a) = U(m / a) a` for `a > 0`, `+inf` otherwise.
    pub fn cell_cost(&self, mass: f64, area: f64) -> f64 {
        if area > 0.0 {
            self.0.u(mass / area) * area
        } else {
            f64::INFINITY
        }
    }

    /// Bregman divergence `U(r|s)`. At `s = 0` the one-sided limit is used,
    /// which requires `U'(0)` to be finite.
    pub fn relative_entropy(&self, r: f64, s: f64) -> Result<f64, EnergyError> {
        if r < 0.0 || r.is_nan() {
            return Err(EnergyError::NegativeDensity(r));
        }
        if !(s >= 0.0) || (s == 0.0 && !self.0.u_prime(0.0).is_finite()) {
            return Err(EnergyError::DomainError(s));
        }
        if r == s {
            return Ok(0.0);
        }
        let v = self.0.u(r) - self.0.u(s) - self.0.u_prime(s) * (r - s);
        Ok(v.max(0.0))
    }

    /// `P(r|s) = P(r) - P(s) - P'(s)(r - s)`.
    pub fn relative_pressure(&self, r: f64, s: f64) -> Result<f64, EnergyError> {
        if r < 0.0 || r.is_nan() {
            return Err(EnergyError::NegativeDensity(r));
        }
        if !(s > 0.0) {
            return Err(EnergyError::DomainError(s));
        }
        if r == s {
            return Ok(0.0);
        }
        Ok(self.0.pressure(r) - self.0.pressure(s) - self.0.pressure_derivative(s) * (r - s))
    }

    pub fn growth(&self) -> Option<GrowthConstants> {
        self.0.growth()
    }

    pub fn name(&self) -> String {
        self.0.name()
    }
}

/// External potential `V` acting on each particle with weight `m_i`.
#[derive(Clone, Default)]
pub enum Potential {
    #[default]
    None,
    /// `V(x) = |x - center|^2 / 2`.
    Quadratic { center: Point },
    /// Any Lipschitz potential given by its value and gradient.
    General {
        value: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
        gradient: Arc<dyn Fn(Point) -> Point + Send + Sync>,
    },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::None => write!(f, "None"),
            Potential::Quadratic { center } => write!(f, "Quadratic({}, {})", center.x, center.y),
            Potential::General { .. } => write!(f, "General"),
        }
    }
}

impl Potential {
    pub fn value(&self, x: Point) -> f64 {
        match self {
            Potential::None => 0.0,
            Potential::Quadratic { center } => 0.5 * (x - *center).norm_squared(),
            Potential::General { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match self {
            Potential::None => Point::ORIGIN,
            Potential::Quadratic { center } => x - *center,
            Potential::General { gradient, .. } => gradient(x),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Potential::None)
    }
}
