//! Lloyd's algorithm with k-means++ seeding over vectorized embeddings,
//! under the `L²(ρ)` grid norm.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::embedding::{vector_distance, VectorizedEmbedding};

use super::ExperimentError;

#[derive(Clone, Debug)]
pub struct Clustering {
    /// Cluster index per input embedding.
    pub assignments: Vec<usize>,
    pub centroids: Vec<VectorizedEmbedding>,
    /// Inertia after each assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
}

pub fn kmeanspp_cluster(
    embeddings: &[VectorizedEmbedding],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Clustering, ExperimentError> {
    let count = embeddings.len();
    if k == 0 || k > count {
        return Err(ExperimentError::BadK { k, count });
    }
    let m = embeddings[0].m();
    for e in embeddings {
        if e.m() != m {
            return Err(ExperimentError::Embed(
                crate::embedding::EmbedError::ResolutionMismatch { a: m, b: e.m() },
            ));
        }
    }
    let dist_sq = |a: &VectorizedEmbedding, b: &VectorizedEmbedding| -> f64 {
        vector_distance(a, b).expect("equal resolutions").powi(2)
    };

    let mut rng = StdRng::seed_from_u64(seed);
    // k-means++ seeding: next centroid drawn with probability proportional
    // to the squared distance to the nearest chosen one.
    let mut centroids: Vec<VectorizedEmbedding> = Vec::with_capacity(k);
    centroids.push(embeddings[rng.gen_range(0..count)].clone());
    let mut nearest_sq: Vec<f64> = embeddings.iter().map(|e| dist_sq(e, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest_sq.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = count - 1;
            for (i, &w) in nearest_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            (0..count)
                .find(|&i| nearest_sq[i] == 0.0)
                .unwrap_or(0)
        };
        let c = embeddings[next].clone();
        for (slot, e) in nearest_sq.iter_mut().zip(embeddings) {
            *slot = slot.min(dist_sq(e, &c));
        }
        centroids.push(c);
    }

    let mut assignments = vec![0usize; count];
    let mut inertia_history = Vec::new();
    for _ in 0..max_iters {
        // Assignment step.
        let mut inertia = 0.0;
        let mut changed = false;
        for (i, e) in embeddings.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist_sq(e, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        inertia_history.push(inertia);
        if !changed && inertia_history.len() > 1 {
            break;
        }
        // Update step: centroid = mean of its members; empty clusters keep
        // their previous centroid.
        let grid = m * m;
        let mut sums = vec![crate::geometry::Point2::ZERO; k * grid];
        let mut counts = vec![0usize; k];
        for (e, &a) in embeddings.iter().zip(&assignments) {
            counts[a] += 1;
            for (idx, &v) in e.values().iter().enumerate() {
                sums[a * grid + idx] = sums[a * grid + idx] + v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let scale = 1.0 / counts[c] as f64;
            let values = sums[c * grid..(c + 1) * grid]
                .iter()
                .map(|&p| p * scale)
                .collect();
            centroids[c] = VectorizedEmbedding::new(m, values);
        }
    }
    Ok(Clustering {
        assignments,
        centroids,
        inertia_history,
    })
}
