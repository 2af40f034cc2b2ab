//! Closed-form convex potentials whose gradients transport the unit square
//! onto disc-, cross- and square-shaped targets.

use crate::embedding::VectorizedEmbedding;
use crate::geometry::Point2;
use crate::io::measure_from_atoms;
use crate::measure::DiscreteMeasure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrescribedMap {
    Disk,
    Cross,
    Square,
}

impl PrescribedMap {
    pub fn name(&self) -> &'static str {
        match self {
            PrescribedMap::Disk => "disk",
            PrescribedMap::Cross => "cross",
            PrescribedMap::Square => "square",
        }
    }

    pub fn parse(s: &str) -> Option<PrescribedMap> {
        match s {
            "disk" => Some(PrescribedMap::Disk),
            "cross" => Some(PrescribedMap::Cross),
            "square" => Some(PrescribedMap::Square),
            _ => None,
        }
    }

    /// The convex potential φ.
    pub fn potential(&self, p: Point2) -> f64 {
        let (x, y) = (p.x, p.y);
        match self {
            PrescribedMap::Disk => {
                0.25 * (x + y) + 0.07 * ((x + y).abs().powf(1.5) + (x - y).abs().powf(1.5))
            }
            PrescribedMap::Cross => {
                let (a, b) = cross_branches(x, y);
                0.5 * (x + y) + 0.04 * a.max(b)
            }
            PrescribedMap::Square => 0.5 * (x * x + y * y),
        }
    }

    /// The transport map ∇φ. At cross tie points the first branch wins;
    /// the tie set is ρ-null so pushforwards are unaffected.
    pub fn gradient(&self, p: Point2) -> Point2 {
        let (x, y) = (p.x, p.y);
        match self {
            PrescribedMap::Disk => {
                let u = x + y;
                let v = x - y;
                // d|t|^{3/2}/dt = 1.5·sign(t)·|t|^{1/2}
                let du = 1.5 * u.signum() * u.abs().sqrt();
                let dv = 1.5 * v.signum() * v.abs().sqrt();
                Point2::new(0.25 + 0.07 * (du + dv), 0.25 + 0.07 * (du - dv))
            }
            PrescribedMap::Cross => {
                let (a, b) = cross_branches(x, y);
                let grad = if a >= b {
                    Point2::new(
                        8.0 * (x + y - 1.0) + 2.0 * (2.0 * x - 1.0),
                        8.0 * (x + y - 1.0) + 2.0 * (2.0 * y - 1.0),
                    )
                } else {
                    Point2::new(
                        8.0 * (x - y) + 2.0 * (2.0 * x - 1.0),
                        -8.0 * (x - y) + 2.0 * (2.0 * y - 1.0),
                    )
                };
                Point2::new(0.5, 0.5) + grad * 0.04
            }
            PrescribedMap::Square => p,
        }
    }

    /// Pushforward of the `n_grid × n_grid` cell-center discretization of ρ
    /// through ∇φ, with uniform weights.
    pub fn target_measure(&self, n_grid: usize) -> DiscreteMeasure {
        assert!(n_grid >= 2);
        let mut atoms = Vec::with_capacity(n_grid * n_grid);
        for s in 0..n_grid {
            for t in 0..n_grid {
                let center = Point2::new(
                    (s as f64 + 0.5) / n_grid as f64,
                    (t as f64 + 0.5) / n_grid as f64,
                );
                atoms.push((self.gradient(center), 1.0));
            }
        }
        measure_from_atoms(atoms).expect("gradient atoms are valid")
    }

    /// Grid projection of the exact map: per grid cell, the mean of ∇φ over
    /// a `samples × samples` midpoint rule. Exact for the square map; the
    /// default `samples = 8` resolves the kinked disk/cross gradients to
    /// well below experiment noise.
    pub fn vectorized(&self, m: usize, samples: usize) -> VectorizedEmbedding {
        assert!(samples >= 1);
        let mut values = Vec::with_capacity(m * m);
        let h = 1.0 / (m as f64 * samples as f64);
        for s in 0..m {
            for t in 0..m {
                let mut acc = Point2::ZERO;
                for a in 0..samples {
                    for b in 0..samples {
                        let p = Point2::new(
                            s as f64 / m as f64 + (a as f64 + 0.5) * h,
                            t as f64 / m as f64 + (b as f64 + 0.5) * h,
                        );
                        acc = acc + self.gradient(p);
                    }
                }
                values.push(acc * (1.0 / (samples * samples) as f64));
            }
        }
        VectorizedEmbedding::new(m, values)
    }
}

fn cross_branches(x: f64, y: f64) -> (f64, f64) {
    let shared = 0.5 * (2.0 * x - 1.0).powi(2) + 0.5 * (2.0 * y - 1.0).powi(2);
    let a = 4.0 * (x + y - 1.0).powi(2) + shared;
    let b = 4.0 * (x - y).powi(2) + shared;
    (a, b)
}
