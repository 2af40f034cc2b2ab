//! Distances between discrete measures: exact Wasserstein via the
//! transportation LP, an entropic Sinkhorn surrogate, total variation, and
//! log-log exponent fits.

mod flow;
mod sinkhorn;

pub use sinkhorn::sinkhorn;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::measure::DiscreteMeasure;

/// Desk-scale cap on support sizes for the exact LP.
pub const SUPPORT_LIMIT: usize = 2000;

/// Minimum multiplicative x-range for an exponent fit: 0.9 decades.
/// (A strict decade would reject chord-length families that shrink an
/// endpoint by a fraction of a percent.)
const MIN_X_RATIO: f64 = 7.943282347242816; // 10^0.9

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("support sizes {mu} × {nu} exceed the limit of {limit} atoms")]
    SizeLimit { mu: usize, nu: usize, limit: usize },
    #[error("Sinkhorn stalled after {iterations} iterations (marginal violation {violation:.3e})")]
    NoConvergence { iterations: usize, violation: f64 },
    #[error("degenerate regression input: {0}")]
    DegenerateInput(String),
}

/// An optimal coupling between two discrete measures.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    /// Row-major `|mu| × |nu|` coupling matrix.
    coupling: Vec<f64>,
}

impl TransportPlan {
    pub fn row_measure(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn column_measure(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.nu.len() + j]
    }

    /// Largest ℓ1 defect of the row and column marginals.
    pub fn marginal_violation(&self) -> f64 {
        let (n, m) = (self.mu.len(), self.nu.len());
        let mut row_err = 0.0;
        for i in 0..n {
            let sum: f64 = self.coupling[i * m..(i + 1) * m].iter().sum();
            row_err += (sum - self.mu.weights()[i]).abs();
        }
        let mut col_err = 0.0;
        for j in 0..m {
            let sum: f64 = (0..n).map(|i| self.coupling[i * m + j]).sum();
            col_err += (sum - self.nu.weights()[j]).abs();
        }
        row_err.max(col_err)
    }
}

/// Exact `W_p` for `p ∈ {1, 2}` by solving the transportation LP.
///
/// Returns the distance (the optimal cost to the power `1/p`) together with
/// an optimal plan whose marginals match the inputs within 1e-9.
pub fn wasserstein_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: u32,
) -> Result<(f64, TransportPlan), MetricError> {
    assert!(p == 1 || p == 2, "only W1 and W2 are supported");
    if mu.len() > SUPPORT_LIMIT || nu.len() > SUPPORT_LIMIT {
        return Err(MetricError::SizeLimit {
            mu: mu.len(),
            nu: nu.len(),
            limit: SUPPORT_LIMIT,
        });
    }
    let (n, m) = (mu.len(), nu.len());
    let mut cost = Vec::with_capacity(n * m);
    for a in mu.points() {
        for b in nu.points() {
            let d = a.dist(*b);
            cost.push(if p == 1 { d } else { d * d });
        }
    }
    let supply = flow::integerize(mu.weights());
    let demand = flow::integerize(nu.weights());
    let int_flow = flow::min_cost_transport(&supply, &demand, &cost);
    let coupling = flow::flow_to_coupling(&int_flow);
    let value: f64 = coupling.iter().zip(&cost).map(|(&g, &c)| g * c).sum();
    let distance = if p == 1 { value } else { value.max(0.0).sqrt() };
    Ok((
        distance,
        TransportPlan {
            mu: mu.clone(),
            nu: nu.clone(),
            coupling,
        },
    ))
}

/// Total variation as the ℓ1 norm of weight differences over the merged
/// support (exact coordinate match), with values in `[0, 2]`.
pub fn tv_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut merged: BTreeMap<(u64, u64), (f64, f64)> = BTreeMap::new();
    for (p, &w) in mu.points().iter().zip(mu.weights()) {
        let e = merged
            .entry((p.x.to_bits(), p.y.to_bits()))
            .or_insert((0.0, 0.0));
        e.0 += w;
    }
    for (p, &w) in nu.points().iter().zip(nu.weights()) {
        let e = merged
            .entry((p.x.to_bits(), p.y.to_bits()))
            .or_insert((0.0, 0.0));
        e.1 += w;
    }
    merged.values().map(|&(a, b)| (a - b).abs()).sum()
}

/// A least-squares fit of `log y` against `log x`.
#[derive(Clone, Copy, Debug)]
pub struct RegressionFit {
    /// Empirical Hölder exponent.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub count: usize,
}

/// Fits `log y = slope · log x + intercept` over strictly positive pairs.
pub fn holder_fit(pairs: &[(f64, f64)]) -> Result<RegressionFit, MetricError> {
    if pairs.len() < 3 {
        return Err(MetricError::DegenerateInput(format!(
            "{} pairs, need at least 3",
            pairs.len()
        )));
    }
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| !positive(x) || !positive(y)) {
        return Err(MetricError::DegenerateInput(format!(
            "non-positive pair ({x}, {y})"
        )));
    }
    let x_min = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = pairs.iter().map(|p| p.0).fold(0.0f64, f64::max);
    if x_max / x_min < MIN_X_RATIO {
        return Err(MetricError::DegenerateInput(format!(
            "x range {:.3e}..{:.3e} spans less than a decade",
            x_min, x_max
        )));
    }
    let n = pairs.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in pairs {
        sx += x.ln();
        sy += y.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let dx = x.ln() - mx;
        let dy = y.ln() - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy <= 1e-30 {
        1.0
    } else {
        1.0 - (ss_res / syy).max(0.0)
    };
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        count: pairs.len(),
    })
}
