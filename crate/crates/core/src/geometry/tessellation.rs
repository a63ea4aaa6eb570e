use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{clip_disk, clip_halfplane, Cell, EdgeKind, Piece, Vertex};
use super::domain::Domain;
use super::point::Point;
use super::GeometryError;
use crate::linalg::SparseMatrix;

/// Which family of tessellations the cells are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Laguerre cells covering the whole domain.
    Full,
    /// Laguerre cells intersected with the ball of radius `sqrt(w_i)`.
    Clipped,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Mode::Full),
            "clipped" => Ok(Mode::Clipped),
            other => Err(format!("unknown tessellation mode {other:?}")),
        }
    }
}

/// Interfaces shorter than this fraction of the domain diameter are dropped.
pub const INTERFACE_CUTOFF: f64 = 1e-12;
/// Particles closer than this fraction of the diameter are coincident.
pub const COINCIDENCE: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct Tessellation {
    pub mode: Mode,
    pub cells: Vec<Cell>,
    pub positions: Vec<Point>,
    pub weights: Vec<f64>,
    /// Per cell, the sorted list of `(neighbor, interface length)`.
    interfaces: Vec<Vec<(usize, f64)>>,
    diameter: f64,
}

impl Tessellation {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn interfaces_of(&self, i: usize) -> &[(usize, f64)] {
        &self.interfaces[i]
    }

    /// Interface length between cells `i` and `j`, zero when not adjacent.
    pub fn interface(&self, i: usize, j: usize) -> f64 {
        self.interfaces[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|k| self.interfaces[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn domain_diameter(&self) -> f64 {
        self.diameter
    }

    /// Barycenter of each cell; empty cells fall back to their particle.
    pub fn barycenters(&self) -> Vec<Point> {
        self.cells
            .iter()
            .map(|c| c.barycenter.unwrap_or(c.origin))
            .collect()
    }
}

/// Uniform bucket grid over the particle positions.
struct Grid {
    origin: Point,
    size: f64,
    nx: usize,
    ny: usize,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    fn new(points: &[Point]) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let n = points.len().max(1);
        let extent = (hi - lo).x.max((hi - lo).y).max(1e-300);
        let area = ((hi.x - lo.x).max(extent * 1e-3)) * ((hi.y - lo.y).max(extent * 1e-3));
        // roughly two particles per bucket
        let mut size = (2.0 * area / n as f64).sqrt();
        let max_dim = 2 * (n as f64).sqrt().ceil() as usize + 1;
        size = size.max(extent / max_dim as f64);
        let nx = (((hi.x - lo.x) / size).floor() as usize + 1).min(max_dim + 1);
        let ny = (((hi.y - lo.y) / size).floor() as usize + 1).min(max_dim + 1);
        let mut counts = vec![0u32; nx * ny + 1];
        let key = |p: &Point| {
            let gx = (((p.x - lo.x) / size) as usize).min(nx - 1);
            let gy = (((p.y - lo.y) / size) as usize).min(ny - 1);
            gy * nx + gx
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        Self { origin: lo, size, nx, ny, start: counts, items }
    }

    fn coords(&self, p: Point) -> (usize, usize) {
        let gx = (((p.x - self.origin.x) / self.size).max(0.0) as usize).min(self.nx - 1);
        let gy = (((p.y - self.origin.y) / self.size).max(0.0) as usize).min(self.ny - 1);
        (gx, gy)
    }

    fn bucket(&self, gx: usize, gy: usize) -> &[u32] {
        let k = gy * self.nx + gx;
        &self.items[self.start[k] as usize..self.start[k + 1] as usize]
    }
}

struct Scratch {
    poly: Vec<Vertex>,
    tmp: Vec<Vertex>,
    candidates: Vec<(f64, usize, Point)>,
}

/// Builds the Laguerre tessellation of `domain` for the given particles and
/// weights.
pub fn build_tessellation(
    domain: &Domain,
    positions: &[Point],
    weights: &[f64],
    mode: Mode,
) -> Result<Tessellation, GeometryError> {
    let n = positions.len();
    if weights.len() != n {
        return Err(GeometryError::LengthMismatch { positions: n, weights: weights.len() });
    }
    if positions.iter().any(|p| !p.is_finite()) || weights.iter().any(|w| w.is_nan()) {
        return Err(GeometryError::NonFinite);
    }
    let grid = Grid::new(positions);
    let w_max = weights
        .iter()
        .copied()
        .filter(|w| mode == Mode::Full || *w > 0.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let diameter = domain.diameter();

    let built: Vec<Result<(Cell, Vec<(usize, f64)>), GeometryError>> = (0..n)
        .into_par_iter()
        .map_init(
            || Scratch { poly: Vec::with_capacity(32), tmp: Vec::with_capacity(32), candidates: Vec::with_capacity(64) },
            |scratch, i| build_cell(domain, positions, weights, mode, &grid, w_max, i, scratch),
        )
        .collect();

    let mut cells = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for item in built {
        let (cell, lens) = item?;
        cells.push(cell);
        raw.push(lens);
    }
    let interfaces = symmetrize(&raw, &cells, INTERFACE_CUTOFF * diameter);
    Ok(Tessellation {
        mode,
        cells,
        positions: positions.to_vec(),
        weights: weights.to_vec(),
        interfaces,
        diameter,
    })
}

fn symmetrize(raw: &[Vec<(usize, f64)>], cells: &[Cell], cutoff: f64) -> Vec<Vec<(usize, f64)>> {
    let n = raw.len();
    let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for &(j, len_ij) in &raw[i] {
            let reverse = raw[j].iter().find(|(k, _)| *k == i).map(|e| e.1);
            // each pair is handled once, from the smaller index when both sides see it
            let len = match reverse {
                Some(_) if j < i => continue,
                Some(len_ji) => 0.5 * (len_ij + len_ji),
                None => len_ij,
            };
            if len > cutoff && !cells[i].is_empty() && !cells[j].is_empty() {
                out[i].push((j, len));
                out[j].push((i, len));
            }
        }
    }
    for row in &mut out {
        row.sort_by_key(|&(j, _)| j);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn build_cell(
    domain: &Domain,
    positions: &[Point],
    weights: &[f64],
    mode: Mode,
    grid: &Grid,
    w_max: f64,
    i: usize,
    scratch: &mut Scratch,
) -> Result<(Cell, Vec<(usize, f64)>), GeometryError> {
    let xi = positions[i];
    let wi = weights[i];
    let diameter = domain.diameter();
    let eps = 1e-13 * diameter;
    let ball = match mode {
        Mode::Full => None,
        Mode::Clipped if wi > 0.0 => Some(wi.sqrt()),
        Mode::Clipped => return Ok((Cell::empty(i, xi), Vec::new())),
    };
    let spread = (w_max - wi).max(0.0);
    let mut pieces = Vec::new();

    for piece in domain.pieces() {
        let edge = if domain.is_convex() { EdgeKind::Boundary } else { EdgeKind::Seam };
        scratch.poly.clear();
        scratch.poly.extend(piece.iter().map(|&p| Vertex { point: p - xi, edge }));
        if !domain.is_convex() {
            mark_boundary_edges(domain, piece, &mut scratch.poly);
        }
        if let Some(r) = ball {
            // square slightly larger than the ball: its edges never touch the circle
            let h = 1.05 * r;
            for (n, c) in [
                (Point::new(1.0, 0.0), h),
                (Point::new(-1.0, 0.0), h),
                (Point::new(0.0, 1.0), h),
                (Point::new(0.0, -1.0), h),
            ] {
                clip_halfplane(&scratch.poly, n, c, EdgeKind::Boundary, &mut scratch.tmp, eps);
                std::mem::swap(&mut scratch.poly, &mut scratch.tmp);
                if scratch.poly.is_empty() {
                    break;
                }
            }
        }
        if scratch.poly.is_empty() {
            continue;
        }
        clip_against_neighbors(positions, weights, grid, i, ball, spread, diameter, scratch)?;
        if scratch.poly.is_empty() {
            continue;
        }
        match ball {
            None => pieces.push(Piece::Loop(scratch.poly.clone())),
            Some(r) => {
                if let Some(p) = clip_disk(&scratch.poly, Point::ORIGIN, r, eps) {
                    pieces.push(p);
                }
            }
        }
    }
    let cell = Cell::from_pieces(i, xi, pieces);
    let mut lens = Vec::new();
    for piece in &cell.pieces {
        piece.interface_lengths(&mut lens);
    }
    Ok((cell, lens))
}

/// Seam edges of a triangulated domain that lie on the true boundary.
fn mark_boundary_edges(domain: &Domain, piece: &[Point], poly: &mut [Vertex]) {
    let boundary = domain.boundary();
    let m = boundary.len();
    let k = piece.len();
    for a in 0..k {
        let p = piece[a];
        let q = piece[(a + 1) % k];
        let on_boundary = (0..m).any(|b| boundary[b] == p && boundary[(b + 1) % m] == q);
        if on_boundary {
            poly[a].edge = EdgeKind::Boundary;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn clip_against_neighbors(
    positions: &[Point],
    weights: &[f64],
    grid: &Grid,
    i: usize,
    ball: Option<f64>,
    spread: f64,
    diameter: f64,
    scratch: &mut Scratch,
) -> Result<(), GeometryError> {
    let xi = positions[i];
    let wi = weights[i];
    let eps = 1e-13 * diameter;
    let coincident = COINCIDENCE * diameter;
    let (gx, gy) = grid.coords(xi);
    let mut reach = cell_reach(&scratch.poly, ball);

    let mut ring = 0usize;
    loop {
        let x0 = gx as isize - ring as isize;
        let x1 = gx + ring;
        let y0 = gy as isize - ring as isize;
        let y1 = gy + ring;
        let xs = x0.max(0) as usize..=x1.min(grid.nx - 1);
        scratch.candidates.clear();
        for yy in y0.max(0) as usize..=y1.min(grid.ny - 1) {
            let full_row = yy as isize == y0 || yy == y1;
            for xx in xs.clone() {
                if !full_row && xx as isize != x0 && xx != x1 {
                    continue;
                }
                for &j in grid.bucket(xx, yy) {
                    let j = j as usize;
                    if j == i {
                        continue;
                    }
                    let d = positions[j] - xi;
                    let dist2 = d.norm_squared();
                    let dist = dist2.sqrt();
                    if dist <= coincident {
                        return Err(GeometryError::CoincidentParticles(i.min(j), i.max(j)));
                    }
                    if ball.is_some() && weights[j] <= 0.0 {
                        continue;
                    }
                    let offset = 0.5 * (dist2 + wi - weights[j]) / dist;
                    if offset < reach {
                        scratch.candidates.push((offset, j, d / dist));
                    }
                }
            }
        }
        // the most restrictive half-planes first, so that later ones are
        // mostly skipped
        scratch.candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        for &(offset, j, normal) in &scratch.candidates {
            if offset >= reach {
                break;
            }
            if scratch.poly.iter().all(|v| v.point.dot(normal) <= offset) {
                continue;
            }
            clip_halfplane(&scratch.poly, normal, offset, EdgeKind::Interface(j), &mut scratch.tmp, eps);
            std::mem::swap(&mut scratch.poly, &mut scratch.tmp);
            if scratch.poly.is_empty() {
                return Ok(());
            }
            reach = cell_reach(&scratch.poly, ball);
        }
        // everything not yet visited is at least this far away
        let mut bound = f64::INFINITY;
        if x0 > 0 {
            bound = bound.min(xi.x - (grid.origin.x + x0 as f64 * grid.size));
        }
        if x1 + 1 < grid.nx {
            bound = bound.min(grid.origin.x + (x1 + 1) as f64 * grid.size - xi.x);
        }
        if y0 > 0 {
            bound = bound.min(xi.y - (grid.origin.y + y0 as f64 * grid.size));
        }
        if y1 + 1 < grid.ny {
            bound = bound.min(grid.origin.y + (y1 + 1) as f64 * grid.size - xi.y);
        }
        if bound == f64::INFINITY {
            return Ok(());
        }
        // a neighbor at distance d cuts only if (d^2 - spread) / 2d < reach
        let needed = reach + (reach * reach + spread).sqrt();
        if bound >= needed {
            return Ok(());
        }
        ring += 1;
    }
}

#[inline]
fn cell_reach(poly: &[Vertex], ball: Option<f64>) -> f64 {
    let r2 = poly.iter().map(|v| v.point.norm_squared()).fold(0.0, f64::max);
    let r = r2.sqrt();
    match ball {
        Some(b) => r.min(b),
        None => r,
    }
}

/// Derivative of the cell areas with respect to the weights.
///
/// Entry `(i, j)` for `i != j` is `-l_ij / (2 |x_i - x_j|)`; the diagonal
/// holds the negated off-diagonal row sum plus, for clipped cells, the arc
/// term `arc_i / (2 sqrt(w_i))`.
pub fn area_jacobian(tess: &Tessellation) -> Result<SparseMatrix, GeometryError> {
    let n = tess.len();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(tess.interfaces[i].len() + 1);
        let mut diag = 0.0;
        for &(j, len) in &tess.interfaces[i] {
            let d = tess.positions[i].distance(tess.positions[j]);
            let v = len / (2.0 * d);
            row.push((j, -v));
            diag += v;
        }
        if tess.mode == Mode::Clipped && !tess.cells[i].is_empty() {
            let w = tess.weights[i];
            if w <= 0.0 {
                return Err(GeometryError::NonpositiveWeight(i));
            }
            diag += tess.cells[i].arc_length / (2.0 * w.sqrt());
        }
        row.push((i, diag));
        row.sort_by_key(|&(j, _)| j);
        rows.push(row);
    }
    Ok(SparseMatrix::from_rows(n, rows))
}
