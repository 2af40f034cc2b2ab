//! Exact 2D convex-polygon computations: Laguerre diagrams clipped to a
//! convex domain, cell areas, interface lengths, moments, and overlays with
//! grids and other diagrams.
//!
//! All operations are pure functions of their inputs; diagrams are immutable
//! after construction and safe to share across threads.

mod diagram;
mod polygon;

pub use diagram::{
    diagram_overlay, grid_overlay, GridOverlay, LaguerreDiagram, Potential, SiteSet, EPS_SITE,
};
pub use polygon::{regular_polygon_disc, ConvexPolygon, Point2, TOL_GEO};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("sites {first} and {second} coincide within tolerance")]
    DuplicateSites { first: usize, second: usize },
    #[error("diagrams are defined over different domains")]
    DomainMismatch,
    #[error("operation is only defined on the unit square domain")]
    UnsupportedDomain,
    #[error("potential length {values} does not match site count {sites}")]
    LengthMismatch { sites: usize, values: usize },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid site set: {0}")]
    InvalidSite(String),
    #[error("potential entries must be finite")]
    InvalidPotential,
}
