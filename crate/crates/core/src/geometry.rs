//! Convex polygon algebra in the plane.
//!
//! A [`ConvexPolygon`] carries both representations: a counterclockwise
//! vertex ring and the matching list of half-spaces `n·z ≤ c`, one per edge.
//! A [`Region`] binds a polygon to two operating-point axes.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

use crate::grid::AxisLabel;
use crate::math::{atan2, sqrt};

/// Incidence tolerance for membership and clipping decisions.
pub const GEOMETRY_EPS: f64 = 1e-9;

/// Relative threshold on the turning sine below which three consecutive
/// vertices count as collinear.
const COLLINEAR_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        sqrt(self.norm2())
    }

    pub fn angle(self) -> f64 {
        atan2(self.y, self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// The closed half-plane `normal · z ≤ offset` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfSpace {
    normal: Vec2,
    offset: f64,
}

impl HalfSpace {
    /// Normalizes `normal` to unit length; `None` for a zero normal.
    pub fn new(normal: Vec2, offset: f64) -> Option<Self> {
        let len = normal.norm();
        (len > 0.0 && len.is_finite()).then(|| Self {
            normal: normal * (1.0 / len),
            offset: offset / len,
        })
    }

    /// Half-plane to the left of the directed edge `a → b`.
    pub fn left_of(a: Vec2, b: Vec2) -> Option<Self> {
        let d = b - a;
        let n = Vec2::new(d.y, -d.x).normalized()?;
        Some(Self {
            normal: n,
            offset: 0.5 * (n.dot(a) + n.dot(b)),
        })
    }

    pub fn normal(&self) -> Vec2 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `offset − normal·p`; non-negative inside.
    pub fn margin(&self, p: Vec2) -> f64 {
        self.offset - self.normal.dot(p)
    }

    pub fn translated(&self, delta: Vec2) -> Self {
        Self {
            normal: self.normal,
            offset: self.offset + self.normal.dot(delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate region: fewer than three non-collinear points")]
    DegenerateRegion,
    #[error("regions are defined over different axes")]
    AxisMismatch,
    #[error("vertex ring and half-spaces do not describe the same convex polygon")]
    Inconsistent,
}

/// Bounded convex polygon with strictly counterclockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    halfspaces: Vec<HalfSpace>,
}

fn turn_is_left(o: Vec2, a: Vec2, b: Vec2) -> bool {
    let u = a - o;
    let w = b - a;
    u.cross(w) > COLLINEAR_REL * u.norm() * w.norm()
}

/// Convex hull of a point set with collinear and duplicate points removed.
///
/// The input ring's order is irrelevant; the output starts at the
/// lexicographically smallest vertex and runs counterclockwise.
pub fn hull_from_ring(points: &[Vec2]) -> Result<ConvexPolygon, GeometryError> {
    let mut pts: Vec<Vec2> = points.iter().copied().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateRegion);
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();

    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && !turn_is_left(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && !turn_is_left(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    ConvexPolygon::from_ccw(hull)
}

impl ConvexPolygon {
    fn from_ccw(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::DegenerateRegion);
        }
        let n = vertices.len();
        let halfspaces = (0..n)
            .map(|k| HalfSpace::left_of(vertices[k], vertices[(k + 1) % n]).ok_or(GeometryError::DegenerateRegion))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { vertices, halfspaces })
    }

    /// Rebuilds a polygon from a stored vertex ring and half-space list,
    /// keeping both as given. The ring must turn strictly left at every
    /// vertex, half-space `k` must support edge `k`, and every vertex must
    /// satisfy every half-space.
    pub fn from_parts(vertices: Vec<Vec2>, halfspaces: Vec<HalfSpace>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 || vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeometryError::DegenerateRegion);
        }
        if halfspaces.len() != n {
            return Err(GeometryError::Inconsistent);
        }
        let scale = vertices.iter().fold(1.0_f64, |s, v| s.max(v.x.abs()).max(v.y.abs()));
        let tol = GEOMETRY_EPS * scale;
        for k in 0..n {
            if !turn_is_left(vertices[k], vertices[(k + 1) % n], vertices[(k + 2) % n]) {
                return Err(GeometryError::Inconsistent);
            }
            let h = &halfspaces[k];
            if h.margin(vertices[k]).abs() > tol || h.margin(vertices[(k + 1) % n]).abs() > tol {
                return Err(GeometryError::Inconsistent);
            }
            if vertices.iter().any(|&v| h.margin(v) < -tol) {
                return Err(GeometryError::Inconsistent);
            }
        }
        Ok(Self { vertices, halfspaces })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, GeometryError> {
        hull_from_ring(&[Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    /// Directed edges `(v_k, v_{k+1})`, wrapping around.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn centroid(&self) -> Vec2 {
        let o = self.vertices[0];
        let mut acc = Vec2::ZERO;
        let mut area2 = 0.0;
        for (a, b) in self.edges() {
            let (a, b) = (a - o, b - o);
            let w = a.cross(b);
            acc += (a + b) * w;
            area2 += w;
        }
        o + acc * (1.0 / (3.0 * area2))
    }

    /// Smallest half-space margin at `p`; non-negative inside.
    pub fn margin(&self, p: Vec2) -> f64 {
        self.halfspaces.iter().map(|h| h.margin(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.margin(p) >= -GEOMETRY_EPS
    }

    pub fn translated(&self, delta: Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + delta).collect(),
            halfspaces: self.halfspaces.iter().map(|h| h.translated(delta)).collect(),
        }
    }

    /// Sutherland–Hodgman clip of the vertex ring by one half-space. The
    /// result may be degenerate (a segment, a point or empty).
    pub fn clip_ring(ring: &[Vec2], h: &HalfSpace) -> Vec<Vec2> {
        let n = ring.len();
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..n {
            let a = ring[k];
            let b = ring[(k + 1) % n];
            let ma = h.margin(a);
            let mb = h.margin(b);
            let a_in = ma >= -GEOMETRY_EPS;
            let b_in = mb >= -GEOMETRY_EPS;
            if a_in {
                out.push(a);
            }
            if (a_in && mb < -GEOMETRY_EPS && ma > GEOMETRY_EPS) || (!a_in && b_in && mb > GEOMETRY_EPS) {
                let t = ma / (ma - mb);
                out.push(a.lerp(b, t));
            }
        }
        out
    }

    /// Vertex ring of the polygon restricted to `h`, possibly degenerate.
    pub fn clipped_vertices(&self, hs: &[HalfSpace]) -> Vec<Vec2> {
        let mut ring = self.vertices.clone();
        for h in hs {
            if ring.is_empty() {
                break;
            }
            ring = Self::clip_ring(&ring, h);
        }
        ring
    }

    /// Intersection with another polygon; `None` when it has no area.
    pub fn intersect(&self, other: &ConvexPolygon) -> Option<ConvexPolygon> {
        let ring = self.clipped_vertices(&other.halfspaces);
        hull_from_ring(&ring).ok()
    }

    /// Parameter interval `[t_lo, t_hi]` of the line `p + t·d` inside the polygon.
    pub fn line_interval(&self, p: Vec2, d: Vec2) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for h in &self.halfspaces {
            // n·(p + t d) ≤ c  ⇔  t (n·d) ≤ margin(p)
            let nd = h.normal.dot(d);
            let m = h.margin(p);
            if nd.abs() <= 1e-15 {
                if m < -GEOMETRY_EPS {
                    return None;
                }
            } else if nd > 0.0 {
                hi = hi.min(m / nd);
            } else {
                lo = lo.max(m / nd);
            }
        }
        (lo <= hi + GEOMETRY_EPS).then_some((lo, hi.max(lo)))
    }

    /// Nearest point to the origin and its squared distance.
    pub fn project_origin(&self) -> (Vec2, f64) {
        if self.contains(Vec2::ZERO) {
            return (Vec2::ZERO, 0.0);
        }
        let mut best = (self.vertices[0], self.vertices[0].norm2());
        for (a, b) in self.edges() {
            let q = closest_on_segment(a, b, Vec2::ZERO);
            let d2 = q.norm2();
            if d2 < best.1 {
                best = (q, d2);
            }
        }
        best
    }

    /// Point at arclength `s` along the boundary, starting at vertex 0.
    pub fn point_at_arclength(&self, s: f64) -> Vec2 {
        let total = self.perimeter();
        let mut s = s % total;
        if s < 0.0 {
            s += total;
        }
        for (a, b) in self.edges() {
            let len = (b - a).norm();
            if s <= len {
                return a.lerp(b, if len > 0.0 { s / len } else { 0.0 });
            }
            s -= len;
        }
        self.vertices[0]
    }

    /// Largest violation of any vertex against any half-space.
    pub fn representation_gap(&self) -> f64 {
        self.vertices
            .iter()
            .map(|&v| -self.margin(v))
            .fold(0.0, f64::max)
    }
}

pub fn closest_on_segment(a: Vec2, b: Vec2, p: Vec2) -> Vec2 {
    let d = b - a;
    let len2 = d.norm2();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    a.lerp(b, t)
}

/// How a region was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Exact,
    Linearized,
    Corrected,
    Interpolated,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Linearized => "linearized",
            Provenance::Corrected => "corrected",
            Provenance::Interpolated => "interpolated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Provenance::Exact),
            "linearized" => Some(Provenance::Linearized),
            "corrected" => Some(Provenance::Corrected),
            "interpolated" => Some(Provenance::Interpolated),
            _ => None,
        }
    }
}

/// A hosting capacity region over two axes, in MW / MVAr.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub polygon: ConvexPolygon,
    pub axes: [AxisLabel; 2],
    pub provenance: Provenance,
}

/// Result of a membership query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Containment {
    pub inside: bool,
    pub margin: f64,
}

impl Region {
    pub fn new(polygon: ConvexPolygon, axes: [AxisLabel; 2], provenance: Provenance) -> Self {
        Self {
            polygon,
            axes,
            provenance,
        }
    }

    pub fn from_points(points: &[Vec2], axes: [AxisLabel; 2], provenance: Provenance) -> Result<Self, GeometryError> {
        Ok(Self::new(hull_from_ring(points)?, axes, provenance))
    }

    pub fn vertices(&self) -> &[Vec2] {
        self.polygon.vertices()
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        self.polygon.halfspaces()
    }

    pub fn area(&self) -> f64 {
        self.polygon.area()
    }

    /// Intersection over the same axes; `Ok(None)` when the regions do not overlap.
    pub fn intersect(&self, other: &Region) -> Result<Option<Region>, GeometryError> {
        if self.axes != other.axes {
            return Err(GeometryError::AxisMismatch);
        }
        Ok(self
            .polygon
            .intersect(&other.polygon)
            .map(|polygon| Region::new(polygon, self.axes.clone(), self.provenance)))
    }

    pub fn translate(&self, delta: Vec2) -> Region {
        Region::new(self.polygon.translated(delta), self.axes.clone(), self.provenance)
    }

    pub fn contains(&self, p: Vec2) -> Containment {
        let margin = self.polygon.margin(p);
        Containment {
            inside: margin >= -GEOMETRY_EPS,
            margin,
        }
    }

    pub fn project_origin(&self) -> (Vec2, f64) {
        self.polygon.project_origin()
    }
}
