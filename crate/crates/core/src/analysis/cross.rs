//! Equal-mass particles on a lattice filling a cross-shaped region.

use serde::Serialize;

use super::initial::InitialData;
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CrossShape {
    pub center: Point,
    /// Length of each arm, tip to tip.
    pub extent: f64,
    pub thickness: f64,
}

impl CrossShape {
    pub fn new(center: Point, thickness: f64) -> Self {
        Self { center, extent: 1.0, thickness }
    }

    pub fn contains(&self, p: Point) -> bool {
        let d = p - self.center;
        let tol = 1e-12 * self.extent;
        let long = 0.5 * self.extent + tol;
        let short = 0.5 * self.thickness + tol;
        (d.x.abs() <= long && d.y.abs() <= short) || (d.x.abs() <= short && d.y.abs() <= long)
    }

    pub fn area(&self) -> f64 {
        2.0 * self.extent * self.thickness - self.thickness * self.thickness
    }

    /// Lattice nodes `center + h (i, j)` inside the cross.
    pub fn lattice(&self, spacing: f64) -> Vec<Point> {
        let reach = (0.5 * self.extent / spacing).floor() as i64 + 1;
        let mut pts = Vec::new();
        for j in -reach..=reach {
            for i in -reach..=reach {
                let p = self.center + Point::new(i as f64 * spacing, j as f64 * spacing);
                if self.contains(p) {
                    pts.push(p);
                }
            }
        }
        pts
    }
}

/// About `n` equal-mass particles on a square lattice inside the cross; the
/// spacing is taken mid-way along the range of spacings giving the node count
/// closest to `n`, away from nodes grazing the boundary.
pub fn cross_initializer(n: usize, mass: f64, shape: &CrossShape) -> InitialData {
    let n = n.max(1);
    let count = |h: f64| shape.lattice(h).len();
    let floor = (shape.area() / n as f64).sqrt() * 0.25;
    // smallest spacing in [floor, extent] whose count is at most `target`
    let first_at_most = |target: usize| {
        let (mut lo, mut hi) = (floor, shape.extent);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if count(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let candidate = |target: usize| {
        let start = first_at_most(target);
        let c = count(start);
        let end = if c > 1 { first_at_most(c - 1) } else { shape.extent };
        (c, 0.5 * (start + end))
    };
    let (below, h_below) = candidate(n);
    let (above, h_above) = candidate(count(first_at_most(n) * (1.0 - 1e-9)).max(n + 1));
    let spacing = if above.abs_diff(n) < below.abs_diff(n) { h_above } else { h_below };
    let positions = shape.lattice(spacing);
    let m = mass / positions.len() as f64;
    InitialData {
        masses: vec![m; positions.len()],
        positions,
        delta_n: None,
        grad_sup: None,
        reference: None,
    }
}
