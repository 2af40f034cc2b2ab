//! Random point-cloud families: Gaussian, mixture of 4 Gaussians, uniform.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::geometry::{Point2, SiteSet};
use crate::measure::DiscreteMeasure;

use super::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian,
    Mixture4,
    Uniform,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Mixture4 => "mixture4",
            FamilyKind::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<FamilyKind> {
        match s {
            "gaussian" => Some(FamilyKind::Gaussian),
            "mixture4" => Some(FamilyKind::Mixture4),
            "uniform" => Some(FamilyKind::Uniform),
            _ => None,
        }
    }
}

/// A distribution over `[0,1]²` with randomized parameters.
///
/// Component means are uniform in `[0.25, 0.75]²` and isotropic standard
/// deviations uniform in `[0.05, 0.15]`, drawn from `param_seed`. Samples
/// falling outside the square are redrawn.
#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub param_seed: u64,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, param_seed: u64) -> Self {
        FamilySpec { kind, param_seed }
    }

    /// The Gaussian components `(mean, std)`; empty for the uniform family.
    pub fn components(&self) -> Vec<(Point2, f64)> {
        let mut rng = StdRng::seed_from_u64(derive_seed(self.param_seed, 0xFA51, 0));
        let count = match self.kind {
            FamilyKind::Gaussian => 1,
            FamilyKind::Mixture4 => 4,
            FamilyKind::Uniform => 0,
        };
        (0..count)
            .map(|_| {
                let mean = Point2::new(
                    0.25 + 0.5 * rng.gen::<f64>(),
                    0.25 + 0.5 * rng.gen::<f64>(),
                );
                let std = 0.05 + 0.1 * rng.gen::<f64>();
                (mean, std)
            })
            .collect()
    }

    /// Mean of the distribution ignoring the boundary clipping (components
    /// have equal mixture weights).
    pub fn nominal_mean(&self) -> Point2 {
        let comps = self.components();
        if comps.is_empty() {
            return Point2::new(0.5, 0.5);
        }
        let mut acc = Point2::ZERO;
        for &(mean, _) in &comps {
            acc = acc + mean;
        }
        acc * (1.0 / comps.len() as f64)
    }

    pub fn config_json(&self) -> serde_json::Value {
        let comps: Vec<_> = self
            .components()
            .iter()
            .map(|(m, s)| json!({"mean": [m.x, m.y], "std": s}))
            .collect();
        json!({
            "kind": self.kind.name(),
            "param_seed": self.param_seed,
            "components": comps,
            "mixture_weights": "equal",
        })
    }
}

/// Draws `n` points from the family (uniform weights `1/n`), rejecting
/// samples outside `[0,1]²`.
pub fn sample_family(spec: &FamilySpec, n: usize, sample_seed: u64) -> DiscreteMeasure {
    assert!(n >= 1);
    let components = spec.components();
    let mut rng = StdRng::seed_from_u64(sample_seed);
    loop {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let p = match spec.kind {
                FamilyKind::Uniform => Point2::new(rng.gen::<f64>(), rng.gen::<f64>()),
                FamilyKind::Gaussian | FamilyKind::Mixture4 => {
                    let (mean, std) = components[rng.gen_range(0..components.len())];
                    let (z1, z2) = gaussian_pair(&mut rng);
                    mean + Point2::new(std * z1, std * z2)
                }
            };
            if (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y) {
                pts.push(p);
            }
        }
        // Coincident samples are measure-zero; retry on the off chance.
        if let Ok(sites) = SiteSet::new(pts) {
            return DiscreteMeasure::uniform(sites);
        }
    }
}

/// Box-Muller transform.
fn gaussian_pair(rng: &mut StdRng) -> (f64, f64) {
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (r * angle.cos(), r * angle.sin())
}
