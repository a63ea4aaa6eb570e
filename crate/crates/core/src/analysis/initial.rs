//! Initial particles from a reference tessellation of a uniform ball pushed
//! forward by a radial mass-matching map.

use std::cell::Cell as Slot;
use std::f64::consts::PI;

use serde::Serialize;

use super::barenblatt::BarenblattSpec;
use super::AnalysisError;
use crate::geometry::{voronoi_in_disk, Cell, Point};

/// Parameters of the reference tessellation.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceTessellation {
    pub seeds: usize,
    pub lloyd_iterations: usize,
    pub ball_radius: f64,
    /// Largest cell diameter.
    pub max_cell_diameter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InitialData {
    pub positions: Vec<Point>,
    pub masses: Vec<f64>,
    /// Projection error of the initial map, when defined.
    pub delta_n: Option<f64>,
    /// Largest gradient norm of the initial map over quadrature points.
    pub grad_sup: Option<f64>,
    pub reference: Option<ReferenceTessellation>,
}

impl InitialData {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Golden-angle spiral of `n` points filling the disk.
pub fn sunflower(n: usize, center: Point, radius: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let r = radius * ((k as f64 + 0.5) / n as f64).sqrt();
            center + Point::from_polar(r, k as f64 * GOLDEN_ANGLE)
        })
        .collect()
}

/// Voronoi cells of the disk after `iterations` Lloyd relaxations.
pub fn lloyd_in_disk(
    mut seeds: Vec<Point>,
    center: Point,
    radius: f64,
    iterations: usize,
) -> Result<(Vec<Point>, Vec<Cell>), AnalysisError> {
    let mut cells = voronoi_in_disk(&seeds, center, radius)?;
    for _ in 0..iterations {
        for (s, c) in seeds.iter_mut().zip(&cells) {
            if let Some(b) = c.barycenter {
                *s = b;
            }
        }
        cells = voronoi_in_disk(&seeds, center, radius)?;
    }
    Ok((seeds, cells))
}

/// Radial map sending the uniform ball of the same mass onto `rho(t0)`.
#[derive(Clone, Copy, Debug)]
pub struct RadialMap {
    spec: BarenblattSpec,
    ball_radius: f64,
    outer: f64,
}

impl RadialMap {
    pub fn new(spec: BarenblattSpec) -> Self {
        let ball_radius = (spec.total_mass() / PI).sqrt();
        Self { spec, ball_radius, outer: spec.support_radius(spec.t0) }
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    /// Image radius `R(r)` solving `pi r^2 = mass within R`.
    pub fn radius(&self, r: f64) -> Result<f64, AnalysisError> {
        let target = PI * r * r;
        let total = self.spec.cumulative_mass(self.spec.t0, self.outer);
        if !(r >= 0.0) || target > total * (1.0 + 1e-12) {
            return Err(AnalysisError::QuadratureFailure(format!("radius {r} cannot be bracketed")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, self.outer);
        while hi - lo > 1e-14 * self.outer {
            let mid = 0.5 * (lo + hi);
            if self.spec.cumulative_mass(self.spec.t0, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn apply(&self, y: Point) -> Result<Point, AnalysisError> {
        let r = y.norm();
        if r == 0.0 {
            return Ok(y);
        }
        Ok(y * (self.radius(r.min(self.ball_radius))? / r))
    }

    /// Operator norm of the Jacobian at `y`: the larger of the radial and
    /// tangential stretch.
    pub fn gradient_norm(&self, y: Point) -> Result<f64, AnalysisError> {
        let r = y.norm().min(self.ball_radius);
        let rho0 = |s: f64| self.spec.density(self.spec.t0, Point::new(s, 0.0));
        if r < 1e-14 * self.ball_radius {
            return Ok(1.0 / rho0(0.0).sqrt());
        }
        let big = self.radius(r)?;
        let radial = r / (rho0(big) * big);
        Ok(radial.max(big / r))
    }
}

/// Particles, masses and projection error for the self-similar test case.
pub fn build_initial_data(spec: &BarenblattSpec, n: usize, lloyd_iters: usize) -> Result<InitialData, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::InvalidParameter("at least one particle is needed".into()));
    }
    let map = RadialMap::new(*spec);
    let radius = map.ball_radius();
    let center = Point::ORIGIN;
    let (_, cells) = lloyd_in_disk(sunflower(n, center, radius), center, radius, lloyd_iters)?;

    let failure: Slot<Option<AnalysisError>> = Slot::new(None);
    let grad_sup = Slot::new(0.0f64);
    let phi = |y: Point| match map.apply(y) {
        Ok(p) => p,
        Err(e) => {
            failure.set(Some(e));
            Point::ORIGIN
        }
    };

    let mut positions = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    let mut delta_sq = 0.0;
    let mut max_diameter: f64 = 0.0;
    for cell in &cells {
        let [sx, sy, area] = cell.integrate(|y| {
            let p = phi(y);
            match map.gradient_norm(y) {
                Ok(g) => grad_sup.set(grad_sup.get().max(g)),
                Err(e) => failure.set(Some(e)),
            }
            [p.x, p.y, 1.0]
        });
        if area <= 0.0 {
            return Err(AnalysisError::QuadratureFailure("empty reference cell".into()));
        }
        let mean = Point::new(sx, sy) / area;
        let [spread] = cell.integrate(|y| [(phi(y) - mean).norm_squared()]);
        delta_sq += spread;
        positions.push(mean);
        masses.push(cell.area);
        max_diameter = max_diameter.max(cell.diameter());
    }
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(InitialData {
        positions,
        masses,
        delta_n: Some(delta_sq.sqrt()),
        grad_sup: Some(grad_sup.get()),
        reference: Some(ReferenceTessellation {
            seeds: n,
            lloyd_iterations: lloyd_iters,
            ball_radius: radius,
            max_cell_diameter: max_diameter,
        }),
    })
}
