//! Convex polygons with exact shoelace areas, moments and half-plane clipping.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use super::GeometryError;

/// Absolute tolerance on areas and lengths for unit-scale domains.
pub const TOL_GEO: f64 = 1e-10;

/// Consecutive vertices closer than this are merged after a clip.
pub(crate) const MERGE_EPS: f64 = 1e-13;

/// Clip results with less area than this collapse to the empty polygon.
///
/// Kept strictly below `TOL_GEO` so that collapsing N slivers cannot eat
/// into the 1e-9 mass-conservation budget of a diagram.
pub(crate) const COLLAPSE_AREA: f64 = 1e-12;

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, positive when `other` is
    /// counter-clockwise from `self`.
    #[inline]
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// A convex polygon stored as a counter-clockwise vertex list.
///
/// The empty polygon (no vertices) represents an intersection with zero
/// area; every non-empty polygon has at least 3 vertices and positive
/// signed area.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexPolygon {
    verts: Vec<Point2>,
}

impl ConvexPolygon {
    /// The empty polygon.
    pub fn empty() -> Self {
        ConvexPolygon { verts: Vec::new() }
    }

    /// Validates a CCW convex vertex list. Near-duplicate vertices are
    /// merged before the convexity check.
    pub fn try_new(verts: Vec<Point2>) -> Result<Self, GeometryError> {
        if verts.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPolygon(
                "non-finite vertex coordinate".into(),
            ));
        }
        let verts = merge_consecutive(verts);
        if verts.len() < 3 {
            return Err(GeometryError::InvalidPolygon(
                "fewer than 3 distinct vertices".into(),
            ));
        }
        let poly = ConvexPolygon { verts };
        if poly.area() <= 0.0 {
            return Err(GeometryError::InvalidPolygon(
                "vertices are not in counter-clockwise order".into(),
            ));
        }
        let n = poly.verts.len();
        for i in 0..n {
            let a = poly.verts[i];
            let b = poly.verts[(i + 1) % n];
            let c = poly.verts[(i + 2) % n];
            if (b - a).cross(c - b) < -TOL_GEO {
                return Err(GeometryError::InvalidPolygon(format!(
                    "reflex corner at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(poly)
    }

    /// Construct without validation; callers guarantee CCW convexity.
    pub(crate) fn from_ccw_unchecked(verts: Vec<Point2>) -> Self {
        ConvexPolygon { verts }
    }

    /// The unit square `[0,1]²`.
    pub fn unit_square() -> Self {
        ConvexPolygon {
            verts: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
        }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.verts
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    /// Signed area by the shoelace formula; zero for the empty polygon.
    pub fn area(&self) -> f64 {
        let n = self.verts.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            twice += a.cross(b);
        }
        0.5 * twice
    }

    /// Unweighted first moment `∫_P x dA`; zero for the empty polygon.
    pub fn first_moment(&self) -> Point2 {
        let n = self.verts.len();
        if n < 3 {
            return Point2::ZERO;
        }
        let mut mx = 0.0;
        let mut my = 0.0;
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            let w = a.cross(b);
            mx += (a.x + b.x) * w;
            my += (a.y + b.y) * w;
        }
        Point2::new(mx / 6.0, my / 6.0)
    }

    /// Area centroid, `None` for the empty polygon.
    pub fn centroid(&self) -> Option<Point2> {
        let a = self.area();
        if a <= 0.0 {
            return None;
        }
        Some(self.first_moment() * (1.0 / a))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> Option<(Point2, Point2)> {
        if self.verts.is_empty() {
            return None;
        }
        let mut lo = self.verts[0];
        let mut hi = self.verts[0];
        for v in &self.verts[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        Some((lo, hi))
    }

    /// Point membership up to `tol` (signed distance scaled by edge length).
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.verts.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            let e = b - a;
            if e.cross(p - a) < -tol * e.norm() {
                return false;
            }
        }
        true
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.verts.iter().enumerate() {
            for b in &self.verts[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// Largest vertex norm: the radius of the smallest origin-centered disc
    /// containing the polygon.
    pub fn max_norm(&self) -> f64 {
        self.verts.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Intersection with the half-plane `{x : ⟨normal, x⟩ ≤ offset}`.
    ///
    /// Returns the empty polygon when the intersection has (numerically)
    /// zero area.
    pub fn clip_halfplane(&self, normal: Point2, offset: f64) -> ConvexPolygon {
        let n = self.verts.len();
        if n < 3 {
            return ConvexPolygon::empty();
        }
        let side: Vec<f64> = self.verts.iter().map(|v| normal.dot(*v) - offset).collect();
        if side.iter().all(|&s| s <= 0.0) {
            return self.clone();
        }
        if side.iter().all(|&s| s > 0.0) {
            return ConvexPolygon::empty();
        }
        let mut out = Vec::with_capacity(n + 2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (cur, nxt) = (self.verts[i], self.verts[j]);
            let (sc, sn) = (side[i], side[j]);
            let cur_in = sc <= 0.0;
            let nxt_in = sn <= 0.0;
            if cur_in {
                out.push(cur);
            }
            if cur_in != nxt_in {
                let t = sc / (sc - sn);
                out.push(cur + (nxt - cur) * t);
            }
        }
        finish_clip(out)
    }

    /// Intersection with another convex polygon.
    pub fn intersect(&self, other: &ConvexPolygon) -> ConvexPolygon {
        if self.is_empty() || other.is_empty() {
            return ConvexPolygon::empty();
        }
        let mut acc = self.clone();
        let n = other.verts.len();
        for i in 0..n {
            let p = other.verts[i];
            let q = other.verts[(i + 1) % n];
            let d = q - p;
            // Outward normal of a CCW edge.
            let normal = Point2::new(d.y, -d.x);
            acc = acc.clip_halfplane(normal, normal.dot(p));
            if acc.is_empty() {
                return acc;
            }
        }
        acc
    }
}

pub(crate) fn finish_clip(verts: Vec<Point2>) -> ConvexPolygon {
    let verts = merge_consecutive(verts);
    if verts.len() < 3 {
        return ConvexPolygon::empty();
    }
    let poly = ConvexPolygon { verts };
    if poly.area() < COLLAPSE_AREA {
        return ConvexPolygon::empty();
    }
    poly
}

fn merge_consecutive(verts: Vec<Point2>) -> Vec<Point2> {
    let n = verts.len();
    if n == 0 {
        return verts;
    }
    let mut out: Vec<Point2> = Vec::with_capacity(n);
    for v in verts {
        if out.last().is_none_or(|last| last.dist(v) > MERGE_EPS) {
            out.push(v);
        }
    }
    while out.len() > 1 && out[0].dist(*out.last().unwrap()) <= MERGE_EPS {
        out.pop();
    }
    out
}

/// Regular k-gon inscribed in the unit circle, CCW, first vertex at (1, 0).
pub fn regular_polygon_disc(k: usize) -> ConvexPolygon {
    assert!(k >= 3, "a polygon needs at least 3 vertices");
    let verts = (0..k)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * (i as f64) / (k as f64);
            Point2::new(a.cos(), a.sin())
        })
        .collect();
    ConvexPolygon::from_ccw_unchecked(verts)
}
