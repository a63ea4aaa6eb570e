//! Convex cell pieces bounded by segments and circular arcs.
//!
//! Piece coordinates are relative to the owning particle; this keeps the
//! moment formulas well conditioned when cells are small compared to their
//! distance from the origin.

use std::f64::consts::{PI, TAU};

use super::point::Point;

/// What lies on the far side of the edge leaving a vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeKind {
    /// Part of the domain boundary.
    Boundary,
    /// Internal seam between convex pieces of a non-convex domain.
    Seam,
    /// Laguerre interface shared with another particle.
    Interface(usize),
    /// Circular arc, traversed counter-clockwise around `center`.
    Arc { center: Point, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub point: Point,
    /// Edge from this vertex to the next one in the loop.
    pub edge: EdgeKind,
}

/// A convex region bounded by a counter-clockwise loop, or a whole disk.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Loop(Vec<Vertex>),
    Disk { center: Point, radius: f64 },
}

/// Zeroth, first and second moments about the local origin.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub area: f64,
    pub first: Point,
    pub second: f64,
}

impl std::ops::AddAssign for Moments {
    fn add_assign(&mut self, rhs: Self) {
        self.area += rhs.area;
        self.first += rhs.first;
        self.second += rhs.second;
    }
}

/// Moments of the triangle (0, p, q) about the origin, signed by orientation.
#[inline]
fn fan_triangle(p: Point, q: Point) -> Moments {
    let c = p.cross(q);
    Moments {
        area: 0.5 * c,
        first: (p + q) * (c / 6.0),
        second: c * (p.norm_squared() + p.dot(q) + q.norm_squared()) / 12.0,
    }
}

/// Counter-clockwise angle from `a` to `b` around `center`, in (0, 2pi].
#[inline]
pub(crate) fn arc_span(center: Point, a: Point, b: Point) -> (f64, f64) {
    let start = (a - center).angle();
    let mut span = (b - center).angle() - start;
    if span <= 0.0 {
        span += TAU;
    }
    (start, span)
}

/// Moments of the circular segment between chord and arc, about the origin.
fn circular_segment(center: Point, radius: f64, a: Point, b: Point) -> Moments {
    let (start, span) = arc_span(center, a, b);
    let end = start + span;
    let r2 = radius * radius;
    // sector minus triangle, both about the circle center
    let ra = a - center;
    let rb = b - center;
    let tri = fan_triangle(ra, rb);
    let sector_first = Point::new(end.sin() - start.sin(), start.cos() - end.cos()) * (r2 * radius / 3.0);
    let area = 0.5 * r2 * span - tri.area;
    let first_c = sector_first - tri.first;
    let second_c = 0.25 * r2 * r2 * span - tri.second;
    Moments {
        area,
        first: first_c + center * area,
        second: second_c + 2.0 * center.dot(first_c) + area * center.norm_squared(),
    }
}

impl Piece {
    pub fn moments(&self) -> Moments {
        match self {
            Piece::Disk { center, radius } => {
                let area = PI * radius * radius;
                Moments {
                    area,
                    first: *center * area,
                    second: 0.5 * area * radius * radius + area * center.norm_squared(),
                }
            }
            Piece::Loop(vertices) => {
                let n = vertices.len();
                let mut m = Moments::default();
                for k in 0..n {
                    let v = vertices[k];
                    let q = vertices[(k + 1) % n].point;
                    m += fan_triangle(v.point, q);
                    if let EdgeKind::Arc { center, radius } = v.edge {
                        m += circular_segment(center, radius, v.point, q);
                    }
                }
                m
            }
        }
    }

    /// Total length of edges facing each neighbor, accumulated into `out`.
    pub(crate) fn interface_lengths(&self, out: &mut Vec<(usize, f64)>) {
        if let Piece::Loop(vertices) = self {
            let n = vertices.len();
            for k in 0..n {
                if let EdgeKind::Interface(j) = vertices[k].edge {
                    let len = vertices[k].point.distance(vertices[(k + 1) % n].point);
                    match out.iter_mut().find(|(o, _)| *o == j) {
                        Some(entry) => entry.1 += len,
                        None => out.push((j, len)),
                    }
                }
            }
        }
    }

    /// Total arc length on circles centered at the local origin.
    pub(crate) fn own_arc_length(&self) -> f64 {
        let tol = 1e-12;
        match self {
            Piece::Disk { center, radius } => {
                if center.norm() <= tol * radius {
                    TAU * radius
                } else {
                    0.0
                }
            }
            Piece::Loop(vertices) => {
                let n = vertices.len();
                let mut total = 0.0;
                for k in 0..n {
                    if let EdgeKind::Arc { center, radius } = vertices[k].edge {
                        if center.norm() <= tol * radius {
                            let (_, span) = arc_span(center, vertices[k].point, vertices[(k + 1) % n].point);
                            total += radius * span;
                        }
                    }
                }
                total
            }
        }
    }

    /// Points on the boundary, arcs sampled every `max_angle` radians.
    pub fn boundary_points(&self, max_angle: f64) -> Vec<Point> {
        match self {
            Piece::Disk { center, radius } => {
                let k = (TAU / max_angle).ceil().max(8.0) as usize;
                (0..k)
                    .map(|i| *center + Point::from_polar(*radius, TAU * i as f64 / k as f64))
                    .collect()
            }
            Piece::Loop(vertices) => {
                let n = vertices.len();
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let v = vertices[k];
                    out.push(v.point);
                    if let EdgeKind::Arc { center, radius } = v.edge {
                        let (start, span) = arc_span(center, v.point, vertices[(k + 1) % n].point);
                        let pieces = (span / max_angle).ceil() as usize;
                        for s in 1..pieces {
                            let t = start + span * s as f64 / pieces as f64;
                            out.push(center + Point::from_polar(radius, t));
                        }
                    }
                }
                out
            }
        }
    }

    /// Exact membership test for a point in local coordinates.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self {
            Piece::Disk { center, radius } => (p - *center).norm() <= radius + tol,
            Piece::Loop(vertices) => {
                let n = vertices.len();
                for k in 0..n {
                    let a = vertices[k].point;
                    let b = vertices[(k + 1) % n].point;
                    match vertices[k].edge {
                        EdgeKind::Arc { center, radius } => {
                            // must lie inside the disk *and* on the inner side of the chord
                            if (p - center).norm() > radius + tol {
                                return false;
                            }
                        }
                        _ => {
                            let e = b - a;
                            if e.cross(p - a) < -tol * e.norm() {
                                return false;
                            }
                        }
                    }
                }
                true
            }
        }
    }
}

/// Clips a convex loop of straight edges against `{u : u . normal <= offset}`.
/// The new edge is tagged with `tag`.
pub(crate) fn clip_halfplane(
    poly: &[Vertex],
    normal: Point,
    offset: f64,
    tag: EdgeKind,
    out: &mut Vec<Vertex>,
    eps: f64,
) {
    out.clear();
    let n = poly.len();
    if n == 0 {
        return;
    }
    let mut prev = poly[n - 1];
    let mut prev_d = prev.point.dot(normal) - offset;
    for &cur in poly {
        let cur_d = cur.point.dot(normal) - offset;
        let prev_in = prev_d <= 0.0;
        let cur_in = cur_d <= 0.0;
        if prev_in != cur_in {
            let t = prev_d / (prev_d - cur_d);
            let p = prev.point + (cur.point - prev.point) * t;
            // leaving: new edge starts here; entering: continue the old edge
            let edge = if prev_in { tag } else { prev.edge };
            out.push(Vertex { point: p, edge });
        }
        if cur_in {
            out.push(cur);
        }
        prev = cur;
        prev_d = cur_d;
    }
    dedup_loop(out, eps);
}

/// Removes zero-length edges; the surviving vertex keeps the outgoing edge.
pub(crate) fn dedup_loop(poly: &mut Vec<Vertex>, eps: f64) {
    if poly.len() < 2 {
        poly.clear();
        return;
    }
    let eps2 = eps * eps;
    let mut k = 0;
    while k < poly.len() && poly.len() > 1 {
        let next = (k + 1) % poly.len();
        if (poly[next].point - poly[k].point).norm_squared() <= eps2 {
            poly.remove(k);
        } else {
            k += 1;
        }
    }
    if poly.len() < 3 {
        poly.clear();
    }
}

/// Intersects a convex loop of straight edges with a closed disk.
pub(crate) fn clip_disk(poly: &[Vertex], center: Point, radius: f64, eps: f64) -> Option<Piece> {
    if radius <= 0.0 || poly.len() < 3 {
        return None;
    }
    let n = poly.len();
    let r2 = radius * radius;
    if poly.iter().all(|v| (v.point - center).norm_squared() <= r2) {
        return Some(Piece::Loop(poly.to_vec()));
    }
    // inside interval [lo, hi] of each edge parameter
    let mut spans: Vec<(usize, Point, Point)> = Vec::with_capacity(n);
    for k in 0..n {
        let p = poly[k].point;
        let q = poly[(k + 1) % n].point;
        let d = q - p;
        let a = d.norm_squared();
        let f = p - center;
        let b = d.dot(f);
        let c = f.norm_squared() - r2;
        let disc = b * b - a * c;
        if disc <= 0.0 {
            continue;
        }
        let root = disc.sqrt();
        // numerically stable pair of roots
        let (s0, s1) = if b >= 0.0 {
            let t = -(b + root);
            (t / a, c / t)
        } else {
            let t = -b + root;
            (c / t, t / a)
        };
        let lo = s0.max(0.0);
        let hi = s1.min(1.0);
        if (hi - lo) * a.sqrt() <= eps {
            continue;
        }
        let start = if lo == 0.0 { p } else { p + d * lo };
        let end = if hi == 1.0 { q } else { p + d * hi };
        spans.push((k, start, end));
    }
    if spans.is_empty() {
        let inside = point_in_convex(poly, center);
        return inside.then_some(Piece::Disk { center, radius });
    }
    let arc = EdgeKind::Arc { center, radius };
    let m = spans.len();
    let mut out = Vec::with_capacity(2 * m);
    for s in 0..m {
        let (k, start, end) = spans[s];
        out.push(Vertex { point: start, edge: poly[k].edge });
        let next_start = spans[(s + 1) % m].1;
        if (next_start - end).norm_squared() > eps * eps {
            out.push(Vertex { point: end, edge: arc });
        }
    }
    if out.len() < 2 {
        return None;
    }
    Some(Piece::Loop(out))
}

fn point_in_convex(poly: &[Vertex], p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|k| {
        let a = poly[k].point;
        let b = poly[(k + 1) % n].point;
        (b - a).cross(p - a) >= 0.0
    })
}

/// A cell of a tessellation: the union of convex pieces owned by one particle.
#[derive(Clone, Debug)]
pub struct Cell {
    pub owner: usize,
    /// Position of the owning particle; piece coordinates are relative to it.
    pub origin: Point,
    pub pieces: Vec<Piece>,
    pub area: f64,
    /// Centroid in global coordinates, `None` for empty cells.
    pub barycenter: Option<Point>,
    /// Integral of `|x - origin|^2` over the cell.
    pub second_moment: f64,
    /// Arc length on the owner's own circle (clipped cells).
    pub arc_length: f64,
}

impl Cell {
    pub fn from_pieces(owner: usize, origin: Point, pieces: Vec<Piece>) -> Self {
        let mut m = Moments::default();
        let mut arc_length = 0.0;
        for piece in &pieces {
            m += piece.moments();
            arc_length += piece.own_arc_length();
        }
        let area = m.area.max(0.0);
        let barycenter = (area > 0.0).then(|| origin + m.first / m.area);
        Self {
            owner,
            origin,
            pieces,
            area,
            barycenter,
            second_moment: m.second.max(0.0),
            arc_length,
        }
    }

    pub fn empty(owner: usize, origin: Point) -> Self {
        Self::from_pieces(owner, origin, Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty() || self.area <= 0.0
    }

    /// Area, barycenter and second moment about the owner.
    pub fn moments(&self) -> (f64, Option<Point>, f64) {
        (self.area, self.barycenter, self.second_moment)
    }

    /// Membership test in global coordinates.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let local = p - self.origin;
        self.pieces.iter().any(|piece| piece.contains(local, tol))
    }

    /// Boundary samples in global coordinates.
    pub fn boundary_points(&self, max_angle: f64) -> Vec<Point> {
        self.pieces
            .iter()
            .flat_map(|p| p.boundary_points(max_angle))
            .map(|p| p + self.origin)
            .collect()
    }

    /// Largest distance between two boundary points.
    pub fn diameter(&self) -> f64 {
        let pts = self.boundary_points(PI / 64.0);
        let mut best: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max(a.distance(*b));
            }
        }
        best
    }

    /// Intersects the cell with a disk given in global coordinates.
    pub fn clip_to_disk(&self, center: Point, radius: f64) -> Cell {
        let local_center = center - self.origin;
        let eps = 1e-13 * radius.max(1e-300);
        let mut pieces = Vec::new();
        for piece in &self.pieces {
            match piece {
                Piece::Loop(vertices) => {
                    assert!(
                        vertices.iter().all(|v| !matches!(v.edge, EdgeKind::Arc { .. })),
                        "disk clipping expects straight-edged cells"
                    );
                    if let Some(p) = clip_disk(vertices, local_center, radius, eps) {
                        pieces.push(p);
                    }
                }
                Piece::Disk { .. } => panic!("disk clipping expects straight-edged cells"),
            }
        }
        Cell::from_pieces(self.owner, self.origin, pieces)
    }

    /// Integrates a vector-valued function over the cell.
    ///
    /// Each piece is fanned from its centroid; straight fans use a degree-4
    /// symmetric triangle rule and curved fans a tensor Gauss rule.
    pub fn integrate<const K: usize>(&self, f: impl Fn(Point) -> [f64; K]) -> [f64; K] {
        let mut acc = [0.0; K];
        for piece in &self.pieces {
            let m = piece.moments();
            if m.area <= 0.0 {
                continue;
            }
            let apex = m.first / m.area;
            let g = |p: Point| f(p + self.origin);
            match piece {
                Piece::Disk { center, radius } => {
                    integrate_arc_fan(*center, *center, *radius, 0.0, TAU, &g, &mut acc)
                }
                Piece::Loop(vertices) => {
                    let n = vertices.len();
                    for k in 0..n {
                        let a = vertices[k].point;
                        let b = vertices[(k + 1) % n].point;
                        match vertices[k].edge {
                            EdgeKind::Arc { center, radius } => {
                                let (start, span) = arc_span(center, a, b);
                                integrate_arc_fan(apex, center, radius, start, span, &g, &mut acc);
                            }
                            _ => integrate_triangle(apex, a, b, &g, &mut acc),
                        }
                    }
                }
            }
        }
        acc
    }
}

// Degree-4 six-point symmetric rule (barycentric coordinates, weights sum to 1).
const TRI_RULE: [(f64, f64, f64); 6] = [
    (0.445948490915965, 0.445948490915965, 0.223381589678011),
    (0.445948490915965, 0.108103018168070, 0.223381589678011),
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.091576213509771, 0.091576213509771, 0.109951743655322),
    (0.091576213509771, 0.816847572980459, 0.109951743655322),
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
];

const GAUSS5: [(f64, f64); 5] = [
    (-0.906179845938664, 0.236926885056189),
    (-0.538469310105683, 0.478628670499366),
    (0.0, 0.568888888888889),
    (0.538469310105683, 0.478628670499366),
    (0.906179845938664, 0.236926885056189),
];

fn integrate_triangle<const K: usize>(
    a: Point,
    b: Point,
    c: Point,
    f: &impl Fn(Point) -> [f64; K],
    acc: &mut [f64; K],
) {
    let area = 0.5 * (b - a).cross(c - a);
    if area == 0.0 {
        return;
    }
    for &(l1, l2, w) in &TRI_RULE {
        let p = a * (1.0 - l1 - l2) + b * l1 + c * l2;
        let v = f(p);
        for k in 0..K {
            acc[k] += area * w * v[k];
        }
    }
}

/// Integrates over `{apex + s (c + R e(t) - apex)}`, s in [0,1], t in the span.
fn integrate_arc_fan<const K: usize>(
    apex: Point,
    center: Point,
    radius: f64,
    start: f64,
    span: f64,
    f: &impl Fn(Point) -> [f64; K],
    acc: &mut [f64; K],
) {
    let segments = (span / (PI / 8.0)).ceil().max(1.0) as usize;
    let h = span / segments as f64;
    for seg in 0..segments {
        let t0 = start + h * seg as f64;
        for &(xt, wt) in &GAUSS5 {
            let t = t0 + 0.5 * h * (1.0 + xt);
            let e = Point::from_polar(1.0, t);
            let rim = center + e * radius;
            let tangent = Point::new(-e.y, e.x) * radius;
            let jac_t = (rim - apex).cross(tangent);
            for &(xs, ws) in &GAUSS5 {
                let s = 0.5 * (1.0 + xs);
                let p = apex + (rim - apex) * s;
                let weight = 0.25 * h * wt * ws * s * jac_t;
                let v = f(p);
                for k in 0..K {
                    acc[k] += weight * v[k];
                }
            }
        }
    }
}
