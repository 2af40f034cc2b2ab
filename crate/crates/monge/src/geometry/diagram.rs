//! Laguerre (power) diagrams clipped to a convex domain.
//!
//! The cell of site `y_i` under a potential `ψ` is
//! `V_i(ψ) = X ∩ ⋂_{j≠i} { x : ⟨y_j − y_i, x⟩ ≤ ψ_j − ψ_i }`,
//! built by direct half-plane clipping against all competitors. Interface
//! lengths are recovered from edge provenance during clipping, so the
//! stored map is exactly symmetric.

use std::collections::BTreeMap;
use std::ops::Deref;

use super::polygon::{ConvexPolygon, Point2, COLLAPSE_AREA, MERGE_EPS};
use super::GeometryError;

/// Two sites closer than this are rejected as duplicates.
pub const EPS_SITE: f64 = 1e-12;

/// A set of pairwise-distinct target sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet {
    points: Vec<Point2>,
}

impl SiteSet {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidSite(
                "non-finite site coordinate".into(),
            ));
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i].dist(points[j]) <= EPS_SITE {
                    return Err(GeometryError::DuplicateSites { first: i, second: j });
                }
            }
        }
        Ok(SiteSet { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maximum pairwise distance between sites (0 for fewer than 2 sites).
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }
}

impl Deref for SiteSet {
    type Target = [Point2];
    fn deref(&self) -> &[Point2] {
        &self.points
    }
}

/// A dual potential vector aligned with a [`SiteSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
}

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPotential);
        }
        Ok(Potential { values })
    }

    pub fn zeros(n: usize) -> Self {
        Potential {
            values: vec![0.0; n],
        }
    }

    /// The potential `ψ_i = ½‖y_i‖²`, whose Laguerre cells are the Voronoi
    /// cells of the sites.
    pub fn voronoi(sites: &SiteSet) -> Self {
        Potential {
            values: sites.points().iter().map(|y| 0.5 * y.norm_sq()).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ψ + c·𝟙`, which leaves every Laguerre cell unchanged.
    pub fn shifted(&self, c: f64) -> Potential {
        Potential {
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }
}

impl Deref for Potential {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl From<Potential> for Vec<f64> {
    fn from(p: Potential) -> Vec<f64> {
        p.values
    }
}

/// Label of a polygon edge during clipping: which competitor cut it, or the
/// domain boundary.
const DOMAIN_EDGE: u32 = u32::MAX;

/// A Laguerre diagram of a site set over a convex domain, with the uniform
/// probability density `ρ = 1/area(X)`.
///
/// Empty cells are kept (mass 0, no interfaces) so all vectors stay aligned
/// with the site indices.
#[derive(Clone, Debug)]
pub struct LaguerreDiagram {
    domain: ConvexPolygon,
    sites: SiteSet,
    potential: Potential,
    cells: Vec<ConvexPolygon>,
    masses: Vec<f64>,
    first_moments: Vec<Point2>,
    interfaces: BTreeMap<(usize, usize), f64>,
    density: f64,
}

impl LaguerreDiagram {
    pub fn new(
        domain: &ConvexPolygon,
        sites: &SiteSet,
        psi: &Potential,
    ) -> Result<Self, GeometryError> {
        if sites.len() != psi.len() {
            return Err(GeometryError::LengthMismatch {
                sites: sites.len(),
                values: psi.len(),
            });
        }
        if sites.is_empty() {
            return Err(GeometryError::InvalidSite("empty site set".into()));
        }
        if domain.is_empty() {
            return Err(GeometryError::InvalidPolygon("empty domain".into()));
        }
        let n = sites.len();
        let density = 1.0 / domain.area();
        let pts = sites.points();

        let mut cells = Vec::with_capacity(n);
        let mut masses = vec![0.0; n];
        let mut first_moments = vec![Point2::ZERO; n];
        let mut interfaces = BTreeMap::new();

        // Scratch order: competitors sorted by distance so the cell shrinks
        // early and later clips hit the all-inside fast path.
        let mut order: Vec<u32> = Vec::with_capacity(n - 1);
        for i in 0..n {
            order.clear();
            order.extend((0..n as u32).filter(|&j| j as usize != i));
            order.sort_by(|&a, &b| {
                let da = pts[a as usize].dist(pts[i]);
                let db = pts[b as usize].dist(pts[i]);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });

            let mut cell = LabeledPoly::from_domain(domain);
            for &j in &order {
                let ju = j as usize;
                let normal = pts[ju] - pts[i];
                let offset = psi[ju] - psi[i];
                cell.clip(normal, offset, j);
                if cell.verts.len() < 3 {
                    cell.clear();
                    break;
                }
            }
            let poly = cell.to_polygon();
            if poly.is_empty() {
                cells.push(poly);
                continue;
            }
            masses[i] = poly.area() * density;
            first_moments[i] = poly.first_moment() * density;
            // Store each interface once, from the lower-index cell, so the
            // map is symmetric by construction.
            for (len, label) in cell.edge_lengths() {
                if label != DOMAIN_EDGE && (label as usize) > i {
                    *interfaces.entry((i, label as usize)).or_insert(0.0) += len;
                }
            }
            cells.push(poly);
        }

        Ok(LaguerreDiagram {
            domain: domain.clone(),
            sites: sites.clone(),
            potential: psi.clone(),
            cells,
            masses,
            first_moments,
            interfaces,
            density,
        })
    }

    pub fn domain(&self) -> &ConvexPolygon {
        &self.domain
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, i: usize) -> &ConvexPolygon {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[ConvexPolygon] {
        &self.cells
    }

    /// ρ-masses of the cells; they sum to 1 up to clipping tolerance.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// ρ-weighted first moments `∫_{V_i} x ρ(x) dx`.
    pub fn first_moments(&self) -> &[Point2] {
        &self.first_moments
    }

    /// Euclidean lengths of shared cell boundaries, keyed by `(i, j)` with
    /// `i < j`. Exactly symmetric because each entry is stored once.
    pub fn interfaces(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.interfaces
    }

    /// Interface length between cells `i` and `j` (0 when not adjacent).
    pub fn interface(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.interfaces.get(&key).copied().unwrap_or(0.0)
    }

    /// Uniform density value `1/area(X)`.
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Smallest cell mass.
    pub fn min_mass(&self) -> f64 {
        self.masses.iter().fold(f64::INFINITY, |m, &g| m.min(g))
    }

    /// Whether the interface graph over all sites is connected.
    pub fn interface_graph_connected(&self) -> bool {
        let n = self.len();
        if n <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for (&(i, j), &len) in &self.interfaces {
            if len > 0.0 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Index of the cell containing `p`, if any.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        let pts = self.sites.points();
        let psi = self.potential.values();
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..pts.len() {
            let score = pts[i].dot(p) - psi[i];
            if score > best_score {
                best_score = score;
                best = Some(i);
            }
        }
        best.filter(|_| self.domain.contains(p, 1e-12))
    }
}

/// Polygon with per-edge provenance used while building one cell.
struct LabeledPoly {
    verts: Vec<Point2>,
    /// labels[k] tags the edge verts[k] -> verts[k+1].
    labels: Vec<u32>,
    scratch_v: Vec<Point2>,
    scratch_l: Vec<u32>,
    side: Vec<f64>,
}

impl LabeledPoly {
    fn from_domain(domain: &ConvexPolygon) -> Self {
        let verts = domain.vertices().to_vec();
        let labels = vec![DOMAIN_EDGE; verts.len()];
        LabeledPoly {
            verts,
            labels,
            scratch_v: Vec::new(),
            scratch_l: Vec::new(),
            side: Vec::new(),
        }
    }

    fn clear(&mut self) {
        self.verts.clear();
        self.labels.clear();
    }

    /// Clip by `⟨normal, x⟩ ≤ offset`, tagging newly created edges with
    /// `label`.
    fn clip(&mut self, normal: Point2, offset: f64, label: u32) {
        let n = self.verts.len();
        self.side.clear();
        self.side
            .extend(self.verts.iter().map(|v| normal.dot(*v) - offset));
        if self.side.iter().all(|&s| s <= 0.0) {
            return;
        }
        if self.side.iter().all(|&s| s > 0.0) {
            self.clear();
            return;
        }
        self.scratch_v.clear();
        self.scratch_l.clear();
        for i in 0..n {
            let j = (i + 1) % n;
            let (cur, nxt) = (self.verts[i], self.verts[j]);
            let (sc, sn) = (self.side[i], self.side[j]);
            let cur_in = sc <= 0.0;
            let nxt_in = sn <= 0.0;
            if cur_in {
                self.scratch_v.push(cur);
                self.scratch_l.push(self.labels[i]);
            }
            if cur_in != nxt_in {
                let t = sc / (sc - sn);
                self.scratch_v.push(cur + (nxt - cur) * t);
                // Leaving the half-plane: the new edge runs along the cut
                // line. Entering: the edge continues the old boundary.
                self.scratch_l
                    .push(if cur_in { label } else { self.labels[i] });
            }
        }
        std::mem::swap(&mut self.verts, &mut self.scratch_v);
        std::mem::swap(&mut self.labels, &mut self.scratch_l);
        self.dedup();
    }

    fn dedup(&mut self) {
        let n = self.verts.len();
        if n == 0 {
            return;
        }
        self.scratch_v.clear();
        self.scratch_l.clear();
        for k in 0..n {
            let next = self.verts[(k + 1) % n];
            if self.verts[k].dist(next) > MERGE_EPS {
                self.scratch_v.push(self.verts[k]);
                self.scratch_l.push(self.labels[k]);
            }
        }
        std::mem::swap(&mut self.verts, &mut self.scratch_v);
        std::mem::swap(&mut self.labels, &mut self.scratch_l);
    }

    fn to_polygon(&self) -> ConvexPolygon {
        if self.verts.len() < 3 {
            return ConvexPolygon::empty();
        }
        let poly = ConvexPolygon::from_ccw_unchecked(self.verts.clone());
        if poly.area() < COLLAPSE_AREA {
            return ConvexPolygon::empty();
        }
        poly
    }

    fn edge_lengths(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        let n = self.verts.len();
        (0..n).map(move |k| {
            let len = self.verts[k].dist(self.verts[(k + 1) % n]);
            (len, self.labels[k])
        })
    }
}

/// ρ-areas of pairwise cell intersections between two diagrams over the same
/// domain, keyed `(i, j)` for cell `i` of `a` and cell `j` of `b`.
///
/// The entries sum to 1 up to clipping tolerance.
pub fn diagram_overlay(
    a: &LaguerreDiagram,
    b: &LaguerreDiagram,
) -> Result<BTreeMap<(usize, usize), f64>, GeometryError> {
    if !same_polygon(a.domain(), b.domain()) {
        return Err(GeometryError::DomainMismatch);
    }
    let density = a.density();
    let b_boxes: Vec<_> = b.cells().iter().map(|c| c.bbox()).collect();
    let mut out = BTreeMap::new();
    for (i, ca) in a.cells().iter().enumerate() {
        let Some((alo, ahi)) = ca.bbox() else {
            continue;
        };
        for (j, cb) in b.cells().iter().enumerate() {
            let Some((blo, bhi)) = b_boxes[j] else {
                continue;
            };
            if blo.x > ahi.x || bhi.x < alo.x || blo.y > ahi.y || bhi.y < alo.y {
                continue;
            }
            let inter = ca.intersect(cb);
            if !inter.is_empty() {
                out.insert((i, j), inter.area() * density);
            }
        }
    }
    Ok(out)
}

/// Per-grid-cell decomposition of a diagram over the `m × m` grid on the
/// unit square: `cells(s, t)` lists `(cell index, ρ-area of overlap)`.
#[derive(Clone, Debug)]
pub struct GridOverlay {
    m: usize,
    entries: Vec<Vec<(usize, f64)>>,
}

impl GridOverlay {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Overlap list for the grid cell `[s/m,(s+1)/m) × [t/m,(t+1)/m)`.
    pub fn cell(&self, s: usize, t: usize) -> &[(usize, f64)] {
        &self.entries[s * self.m + t]
    }
}

/// Intersects every diagram cell with the regular `m × m` grid on `[0,1]²`.
pub fn grid_overlay(diag: &LaguerreDiagram, m: usize) -> Result<GridOverlay, GeometryError> {
    if !is_unit_square(diag.domain()) {
        return Err(GeometryError::UnsupportedDomain);
    }
    assert!(m >= 1, "grid resolution must be positive");
    let mf = m as f64;
    let density = diag.density();
    let mut entries = vec![Vec::new(); m * m];
    for (i, cell) in diag.cells().iter().enumerate() {
        let Some((lo, hi)) = cell.bbox() else {
            continue;
        };
        let s0 = ((lo.x * mf).floor() as isize).clamp(0, m as isize - 1) as usize;
        let s1 = ((hi.x * mf).ceil() as isize).clamp(1, m as isize) as usize;
        let t0 = ((lo.y * mf).floor() as isize).clamp(0, m as isize - 1) as usize;
        let t1 = ((hi.y * mf).ceil() as isize).clamp(1, m as isize) as usize;
        for s in s0..s1 {
            let x_lo = s as f64 / mf;
            let x_hi = (s + 1) as f64 / mf;
            let strip = clip_to_xband(cell, x_lo, x_hi);
            if strip.is_empty() {
                continue;
            }
            for t in t0..t1 {
                let y_lo = t as f64 / mf;
                let y_hi = (t + 1) as f64 / mf;
                let piece = clip_to_yband(&strip, y_lo, y_hi);
                if !piece.is_empty() {
                    entries[s * m + t].push((i, piece.area() * density));
                }
            }
        }
    }
    Ok(GridOverlay { m, entries })
}

fn clip_to_xband(poly: &ConvexPolygon, lo: f64, hi: f64) -> ConvexPolygon {
    poly.clip_halfplane(Point2::new(1.0, 0.0), hi)
        .clip_halfplane(Point2::new(-1.0, 0.0), -lo)
}

fn clip_to_yband(poly: &ConvexPolygon, lo: f64, hi: f64) -> ConvexPolygon {
    poly.clip_halfplane(Point2::new(0.0, 1.0), hi)
        .clip_halfplane(Point2::new(0.0, -1.0), -lo)
}

pub(crate) fn same_polygon(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    let (va, vb) = (a.vertices(), b.vertices());
    if va.len() != vb.len() {
        return false;
    }
    if va.is_empty() {
        return true;
    }
    // Allow a cyclic rotation of the vertex list.
    (0..vb.len()).any(|shift| {
        va.iter()
            .enumerate()
            .all(|(k, v)| v.dist(vb[(k + shift) % vb.len()]) <= 1e-12)
    })
}

pub(crate) fn is_unit_square(poly: &ConvexPolygon) -> bool {
    same_polygon(poly, &ConvexPolygon::unit_square())
}
