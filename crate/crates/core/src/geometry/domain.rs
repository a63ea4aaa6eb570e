use std::path::Path;

use super::point::Point;
use super::GeometryError;

/// A closed simple polygon, stored counter-clockwise.
#[derive(Clone, Debug)]
pub struct Domain {
    boundary: Vec<Point>,
    area: f64,
    barycenter: Point,
    diameter: f64,
    convex_hull: Vec<Point>,
    /// Convex pieces covering the polygon; a single piece when it is convex.
    pieces: Vec<Vec<Point>>,
    lower: Point,
    upper: Point,
}

impl Domain {
    /// Builds a domain from a vertex loop. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidDomain(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidDomain("non-finite vertex".into()));
        }
        let mut signed = signed_area(&vertices);
        if signed < 0.0 {
            vertices.reverse();
            signed = -signed;
        }
        let convex_hull = convex_hull(&vertices);
        let diameter = max_pairwise_distance(&convex_hull);
        if !(signed > 1e-14 * diameter * diameter) {
            return Err(GeometryError::InvalidDomain("polygon has zero area".into()));
        }
        check_simple(&vertices, diameter)?;

        let barycenter = polygon_centroid(&vertices, signed);
        let pieces = if is_convex(&vertices) {
            vec![vertices.clone()]
        } else {
            ear_clip(&vertices)?
        };
        let (lower, upper) = bounding_box(&vertices);
        Ok(Self {
            boundary: vertices,
            area: signed,
            barycenter,
            diameter,
            convex_hull,
            pieces,
            lower,
            upper,
        })
    }

    pub fn rectangle(lower: Point, upper: Point) -> Result<Self, GeometryError> {
        Self::new(vec![
            lower,
            Point::new(upper.x, lower.y),
            upper,
            Point::new(lower.x, upper.y),
        ])
    }

    /// Axis-aligned square of the given half width.
    pub fn square(center: Point, half_width: f64) -> Result<Self, GeometryError> {
        let h = Point::new(half_width, half_width);
        Self::rectangle(center - h, center + h)
    }

    pub fn unit_square() -> Self {
        Self::rectangle(Point::ORIGIN, Point::new(1.0, 1.0)).expect("unit square is valid")
    }

    /// Parses a vertex list with one "x y" pair per line. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace().map(str::parse::<f64>);
            match (fields.next(), fields.next(), fields.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => vertices.push(Point::new(x, y)),
                _ => {
                    return Err(GeometryError::InvalidDomain(format!(
                        "line {}: expected \"x y\", got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(vertices)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::InvalidDomain(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn barycenter(&self) -> Point {
        self.barycenter
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn convex_hull(&self) -> &[Point] {
        &self.convex_hull
    }

    pub fn is_convex(&self) -> bool {
        self.pieces.len() == 1
    }

    pub(crate) fn pieces(&self) -> &[Vec<Point>] {
        &self.pieces
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        (self.lower, self.upper)
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.boundary.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.boundary[i];
            let b = self.boundary[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Signed distance of `p` outside the convex hull (non-positive inside).
    pub fn hull_excess(&self, p: Point) -> f64 {
        let hull = &self.convex_hull;
        let n = hull.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let edge = b - a;
            // outward normal of a ccw edge
            let normal = Point::new(edge.y, -edge.x) / edge.norm();
            worst = worst.max((p - a).dot(normal));
        }
        worst
    }
}

pub(crate) fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        s += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * s
}

fn polygon_centroid(poly: &[Point], area: f64) -> Point {
    // shift to the first vertex for accuracy
    let o = poly[0];
    let n = poly.len();
    let mut c = Point::ORIGIN;
    for i in 0..n {
        let p = poly[i] - o;
        let q = poly[(i + 1) % n] - o;
        c += (p + q) * p.cross(q);
    }
    o + c / (6.0 * area)
}

fn bounding_box(poly: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

fn max_pairwise_distance(points: &[Point]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.distance(*b));
        }
    }
    best
}

/// Andrew's monotone chain, counter-clockwise without collinear points.
pub(crate) fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    let scale = max_pairwise_distance(poly).powi(2);
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        (b - a).cross(c - b) >= -1e-12 * scale
    })
}

fn orientation(a: Point, b: Point, c: Point, tol: f64) -> i8 {
    let v = (b - a).cross(c - a);
    if v > tol {
        1
    } else if v < -tol {
        -1
    } else {
        0
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point, tol: f64) -> bool {
    let o1 = orientation(a, b, c, tol);
    let o2 = orientation(a, b, d, tol);
    let o3 = orientation(c, d, a, tol);
    let o4 = orientation(c, d, b, tol);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

fn check_simple(poly: &[Point], diameter: f64) -> Result<(), GeometryError> {
    let n = poly.len();
    let tol = 1e-14 * diameter * diameter;
    for i in 0..n {
        if poly[i].distance(poly[(i + 1) % n]) <= 1e-14 * diameter {
            return Err(GeometryError::InvalidDomain(format!("repeated vertex {i}")));
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share an endpoint
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d, tol) {
                return Err(GeometryError::InvalidDomain(format!(
                    "edges {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

/// Ear-clipping triangulation of a simple ccw polygon.
fn ear_clip(poly: &[Point]) -> Result<Vec<Vec<Point>>, GeometryError> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut triangles = Vec::with_capacity(poly.len() - 2);
    let scale = max_pairwise_distance(poly).powi(2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if (b - a).cross(c - b) <= 1e-14 * scale {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                (b - a).cross(p - a) >= 0.0 && (c - b).cross(p - b) >= 0.0 && (a - c).cross(p - c) >= 0.0
            });
            if !blocked {
                triangles.push(vec![a, b, c]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(GeometryError::InvalidDomain("triangulation failed".into()));
        }
    }
    triangles.push(idx.iter().map(|&i| poly[i]).collect());
    Ok(triangles)
}
