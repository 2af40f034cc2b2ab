//! Semi-discrete optimal transport from the uniform density on a convex
//! planar domain to finitely supported measures, and the embedding of
//! measures into the Hilbert space of transport maps.
//!
//! The pieces:
//! - [`geometry`]: Laguerre diagrams clipped to a convex domain, with exact
//!   cell areas, interface lengths, moments and overlays.
//! - [`solver`]: the dual objective, its derivatives, and a damped Newton
//!   solver matching prescribed cell masses.
//! - [`embedding`]: Monge maps, grid vectorization, map distances and
//!   barycenters.
//! - [`metrics`]: exact Wasserstein distances, Sinkhorn, total variation,
//!   log-log exponent fits.
//! - [`experiments`]: reproducible experiment drivers.
//! - [`io`]: point-cloud, embedding and image file formats.
//!
//! Everything is deterministic given the inputs and, where applicable, the
//! seed; all types are immutable after construction and safe to share
//! across threads.

pub mod embedding;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod measure;
pub mod metrics;
pub mod solver;

pub use embedding::{MongeMap, VectorizedEmbedding};
pub use geometry::{ConvexPolygon, LaguerreDiagram, Point2, Potential, SiteSet};
pub use measure::DiscreteMeasure;
pub use solver::{SolveConfig, SolveReport};
