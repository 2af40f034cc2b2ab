//! Reproducible experiment drivers: distance scatters, sampling curves,
//! stability suites, barycenter grids and clustering.
//!
//! Every experiment is a pure function of its configuration and master
//! seed. Work items (clouds, repeats, pairs) draw from seeds derived per
//! item, so parallel and serial runs produce identical records.

mod checks;
mod families;
mod kmeans;
mod prescribed;
mod suites;

pub use checks::{run_check_suite, CheckResult};
pub use families::{sample_family, FamilyKind, FamilySpec};
pub use kmeans::{kmeanspp_cluster, Clustering};
pub use prescribed::PrescribedMap;
pub use suites::{
    barycenter_grid, distance_scatter, onehalf_experiment, regular_bound_check, sampling_curve,
    stability_suite, summarize_sampling, BarycenterGrid, SamplingTarget, ScatterConfig,
    StabilityOutcome,
};

use serde_json::Value;
use thiserror::Error;

use crate::embedding::EmbedError;
use crate::geometry::GeometryError;
use crate::measure::MeasureError;
use crate::metrics::MetricError;
use crate::solver::SolveError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("k must be between 1 and the number of points ({count}), got {k}")]
    BadK { k: usize, count: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A plot-ready table plus the full configuration needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub id: String,
    /// Echo of every parameter and seed that shaped the rows.
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ExperimentRecord {
    pub fn new(id: &str, config: Value, columns: &[&str]) -> Self {
        ExperimentRecord {
            id: id.to_string(),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values of a named column.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// CSV rendering: header plus one line per row, shortest round-trip
    /// float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON sidecar with the id, configuration echo and column names.
    pub fn metadata_json(&self) -> Value {
        serde_json::json!({
            "experiment": self.id,
            "config": self.config,
            "columns": self.columns,
            "rows": self.rows.len(),
        })
    }
}

/// Derives an independent stream seed from a master seed and item indices
/// (splitmix64 finalizer steps).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Spearman rank correlation; ties get their first-seen rank, which is fine
/// for the strictly varying series this crate produces.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        for (r, &i) in idx.iter().enumerate() {
            ranks[i] = r as f64;
        }
        ranks
    };
    pearson(&rank(xs), &rank(ys))
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
