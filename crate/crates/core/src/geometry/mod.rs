//! Laguerre tessellations of polygonal domains, optionally clipped by the
//! particles' own balls, with exact cell moments and interface data.

mod cell;
mod domain;
mod point;
mod tessellation;

pub use cell::{Cell, EdgeKind, Moments, Piece, Vertex};
pub use domain::Domain;
pub use point::Point;
pub use tessellation::{area_jacobian, build_tessellation, Mode, Tessellation, COINCIDENCE, INTERFACE_CUTOFF};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("particles {0} and {1} coincide")]
    CoincidentParticles(usize, usize),
    #[error("{positions} positions but {weights} weights")]
    LengthMismatch { positions: usize, weights: usize },
    #[error("non-finite particle position or weight")]
    NonFinite,
    #[error("cell {0} is non-empty but has a non-positive weight")]
    NonpositiveWeight(usize),
}

/// Voronoi cells of `seeds` restricted to the disk `(center, radius)`.
pub fn voronoi_in_disk(seeds: &[Point], center: Point, radius: f64) -> Result<Vec<Cell>, GeometryError> {
    let frame = Domain::square(center, 1.1 * radius)?;
    let zeros = vec![0.0; seeds.len()];
    let tess = build_tessellation(&frame, seeds, &zeros, Mode::Full)?;
    Ok(tess.cells.iter().map(|c| c.clip_to_disk(center, radius)).collect())
}
