//! Finitely supported probability measures.

use thiserror::Error;

use crate::geometry::{GeometryError, Point2, SiteSet};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("weight {index} is not strictly positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },
    #[error("{weights} weights for {sites} sites")]
    LengthMismatch { sites: usize, weights: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A probability measure `Σ μ_i δ_{y_i}` with strictly positive weights.
///
/// Zero-weight atoms must be dropped before constructing the measure; the
/// semi-discrete solver requires every target mass to be positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    sites: SiteSet,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates positivity and that the weights sum to 1 within 1e-12.
    pub fn new(sites: SiteSet, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if sites.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                sites: sites.len(),
                weights: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(MeasureError::NonPositiveWeight { index: i, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MeasureError::WeightSum { sum });
        }
        Ok(DiscreteMeasure { sites, weights })
    }

    /// Rescales positive raw weights to sum to 1.
    pub fn new_normalized(sites: SiteSet, raw: Vec<f64>) -> Result<Self, MeasureError> {
        if sites.len() != raw.len() {
            return Err(MeasureError::LengthMismatch {
                sites: sites.len(),
                weights: raw.len(),
            });
        }
        for (i, &w) in raw.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(MeasureError::NonPositiveWeight { index: i, value: w });
            }
        }
        let sum: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / sum).collect();
        Ok(DiscreteMeasure { sites, weights })
    }

    /// Uniform weights `1/n` on the given sites.
    pub fn uniform(sites: SiteSet) -> Self {
        let n = sites.len();
        DiscreteMeasure {
            weights: vec![1.0 / n as f64; n],
            sites,
        }
    }

    /// Single Dirac mass.
    pub fn dirac(site: Point2) -> Result<Self, MeasureError> {
        Ok(DiscreteMeasure {
            sites: SiteSet::new(vec![site])?,
            weights: vec![1.0],
        })
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn points(&self) -> &[Point2] {
        self.sites.points()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Smallest atom weight.
    pub fn min_weight(&self) -> f64 {
        self.weights.iter().fold(f64::INFINITY, |m, &w| m.min(w))
    }

    /// The measure translated by `c` (sites shift, weights unchanged).
    pub fn translated(&self, c: Point2) -> Result<Self, MeasureError> {
        let sites = SiteSet::new(self.points().iter().map(|&p| p + c).collect())?;
        Ok(DiscreteMeasure {
            sites,
            weights: self.weights.clone(),
        })
    }

    /// Mean position `Σ μ_i y_i`.
    pub fn mean(&self) -> Point2 {
        self.points()
            .iter()
            .zip(&self.weights)
            .fold(Point2::ZERO, |acc, (&p, &w)| acc + p * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rule() {
        let sites = SiteSet::new(vec![
            Point2::new(0.1, 0.1),
            Point2::new(0.2, 0.2),
            Point2::new(0.3, 0.3),
        ])
        .unwrap();
        let mu = DiscreteMeasure::new_normalized(sites, vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(mu.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn rejects_zero_weight() {
        let sites = SiteSet::new(vec![Point2::new(0.1, 0.1), Point2::new(0.2, 0.2)]).unwrap();
        assert!(matches!(
            DiscreteMeasure::new(sites, vec![1.0, 0.0]),
            Err(MeasureError::NonPositiveWeight { index: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_sum() {
        let sites = SiteSet::new(vec![Point2::new(0.1, 0.1), Point2::new(0.2, 0.2)]).unwrap();
        assert!(matches!(
            DiscreteMeasure::new(sites, vec![0.6, 0.6]),
            Err(MeasureError::WeightSum { .. })
        ));
    }
}
