//! The Monge embedding: optimal transport maps from the uniform density to
//! discrete measures, their grid vectorization, and distances between maps.

use thiserror::Error;

use crate::geometry::{
    diagram_overlay, grid_overlay, ConvexPolygon, GeometryError, LaguerreDiagram, Point2,
};
use crate::measure::DiscreteMeasure;
use crate::solver::{solve_semidiscrete, SolveConfig, SolveError};

/// Atoms of a pushforward closer than this merge into one.
const ATOM_MERGE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("embeddings have different resolutions: {a} vs {b}")]
    ResolutionMismatch { a: usize, b: usize },
    #[error("bad barycenter weights: {0}")]
    BadWeights(String),
}

/// The optimal piecewise-constant map sending each Laguerre cell to its
/// site, at the optimal potential for a target measure.
#[derive(Clone, Debug)]
pub struct MongeMap {
    diagram: LaguerreDiagram,
}

impl MongeMap {
    pub(crate) fn from_diagram(diagram: LaguerreDiagram) -> Self {
        MongeMap { diagram }
    }

    pub fn diagram(&self) -> &LaguerreDiagram {
        &self.diagram
    }

    pub fn domain(&self) -> &ConvexPolygon {
        self.diagram.domain()
    }

    /// Target sites; the map sends cell `i` onto `targets()[i]`.
    pub fn targets(&self) -> &[Point2] {
        self.diagram.sites().points()
    }

    /// Evaluates the map at a point of the domain.
    pub fn eval(&self, x: Point2) -> Option<Point2> {
        self.diagram.locate(x).map(|i| self.targets()[i])
    }
}

/// Solves the semi-discrete problem and packages the optimal diagram as a
/// map; the cell masses match `measure` within the solver tolerance.
pub fn monge_map(
    domain: &ConvexPolygon,
    measure: &DiscreteMeasure,
    config: &SolveConfig,
) -> Result<MongeMap, SolveError> {
    let report = solve_semidiscrete(domain, measure, config)?;
    let diagram = LaguerreDiagram::new(domain, measure.sites(), &report.potential)?;
    Ok(MongeMap { diagram })
}

/// A map projected onto the piecewise-constant functions over the `m × m`
/// grid of the unit square: `values(s, t) = m² ∫_{X_{s,t}} T dρ`.
///
/// Every value is a ρ-average of target sites, so it lies in their convex
/// hull.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorizedEmbedding {
    m: usize,
    /// Row-major with the x-index `s` outermost: `values[s * m + t]`.
    values: Vec<Point2>,
}

impl VectorizedEmbedding {
    pub fn new(m: usize, values: Vec<Point2>) -> Self {
        assert_eq!(values.len(), m * m);
        VectorizedEmbedding { m, values }
    }

    /// Constant grid, the embedding of a single Dirac.
    pub fn constant(m: usize, value: Point2) -> Self {
        VectorizedEmbedding {
            m,
            values: vec![value; m * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[Point2] {
        &self.values
    }

    pub fn get(&self, s: usize, t: usize) -> Point2 {
        self.values[s * self.m + t]
    }

    /// Flattened coordinates, `2m²` numbers in `values[s][t][{x,y}]` order.
    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|p| [p.x, p.y]).collect()
    }
}

/// Projects a Monge map onto the `m × m` grid (unit-square domains only).
pub fn vectorize(map: &MongeMap, m: usize) -> Result<VectorizedEmbedding, EmbedError> {
    let overlay = grid_overlay(map.diagram(), m)?;
    let targets = map.targets();
    let scale = (m * m) as f64;
    let mut values = Vec::with_capacity(m * m);
    for s in 0..m {
        for t in 0..m {
            let mut acc = Point2::ZERO;
            for &(i, area) in overlay.cell(s, t) {
                acc = acc + targets[i] * area;
            }
            values.push(acc * scale);
        }
    }
    Ok(VectorizedEmbedding { m, values })
}

/// `‖T_a − T_b‖_{L²(ρ)}` computed exactly from the overlay of the two
/// diagrams. Symmetric, and zero iff the maps agree ρ-almost everywhere.
pub fn exact_l2_distance(a: &MongeMap, b: &MongeMap) -> Result<f64, EmbedError> {
    let overlay = diagram_overlay(a.diagram(), b.diagram())?;
    let ya = a.targets();
    let yb = b.targets();
    let mut acc = 0.0;
    for (&(i, j), &mass) in &overlay {
        acc += mass * (ya[i] - yb[j]).norm_sq();
    }
    Ok(acc.max(0.0).sqrt())
}

/// `L²(ρ)` distance between two piecewise-constant grid maps.
pub fn vector_distance(
    a: &VectorizedEmbedding,
    b: &VectorizedEmbedding,
) -> Result<f64, EmbedError> {
    if a.m != b.m {
        return Err(EmbedError::ResolutionMismatch { a: a.m, b: b.m });
    }
    let mut acc = 0.0;
    for (va, vb) in a.values.iter().zip(&b.values) {
        acc += (*va - *vb).norm_sq();
    }
    Ok((acc / (a.m * a.m) as f64).sqrt())
}

/// Entrywise weighted average of embeddings; the Hilbert mean, which
/// minimizes the weighted sum of squared [`vector_distance`]s.
pub fn barycenter_embedding(
    embeddings: &[VectorizedEmbedding],
    lambdas: &[f64],
) -> Result<VectorizedEmbedding, EmbedError> {
    if embeddings.is_empty() || embeddings.len() != lambdas.len() {
        return Err(EmbedError::BadWeights(format!(
            "{} weights for {} embeddings",
            lambdas.len(),
            embeddings.len()
        )));
    }
    if lambdas.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(EmbedError::BadWeights("negative weight".into()));
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EmbedError::BadWeights(format!("weights sum to {sum}")));
    }
    let m = embeddings[0].m;
    for e in embeddings {
        if e.m != m {
            return Err(EmbedError::ResolutionMismatch { a: m, b: e.m });
        }
    }
    let mut values = vec![Point2::ZERO; m * m];
    for (e, &l) in embeddings.iter().zip(lambdas) {
        for (acc, &v) in values.iter_mut().zip(&e.values) {
            *acc = *acc + v * l;
        }
    }
    Ok(VectorizedEmbedding { m, values })
}

/// The measure `Σ_{s,t} m⁻² δ_{v[s][t]}` with coincident atoms merged.
pub fn pushforward_measure(v: &VectorizedEmbedding) -> DiscreteMeasure {
    let mut reps: Vec<(Point2, f64)> = Vec::new();
    for &p in &v.values {
        match reps
            .iter_mut()
            .find(|(q, _)| q.dist(p) <= ATOM_MERGE_EPS)
        {
            Some((_, w)) => *w += 1.0,
            None => reps.push((p, 1.0)),
        }
    }
    let sites = crate::geometry::SiteSet::new(reps.iter().map(|&(p, _)| p).collect())
        .expect("merged atoms are pairwise distinct");
    let weights = reps.iter().map(|&(_, w)| w).collect();
    DiscreteMeasure::new_normalized(sites, weights).expect("positive weights")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{regular_polygon_disc, Potential, SiteSet};
    use crate::metrics::{tv_distance, wasserstein_exact};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_cloud(n: usize, rng: &mut StdRng) -> DiscreteMeasure {
        loop {
            let pts: Vec<Point2> = (0..n)
                .map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            if let Ok(sites) = SiteSet::new(pts) {
                return DiscreteMeasure::uniform(sites);
            }
        }
    }

    fn grid_measure(k: usize) -> DiscreteMeasure {
        let mut pts = Vec::with_capacity(k * k);
        for s in 0..k {
            for t in 0..k {
                pts.push(Point2::new(
                    (s as f64 + 0.5) / k as f64,
                    (t as f64 + 0.5) / k as f64,
                ));
            }
        }
        DiscreteMeasure::uniform(SiteSet::new(pts).unwrap())
    }

    /// Exact ∫_T f over a triangle for quadratic f: edge-midpoint rule.
    fn triangle_quadratic_integral(
        a: Point2,
        b: Point2,
        c: Point2,
        f: impl Fn(Point2) -> f64,
    ) -> f64 {
        let area = 0.5 * (b - a).cross(c - a);
        let m1 = (a + b) * 0.5;
        let m2 = (b + c) * 0.5;
        let m3 = (c + a) * 0.5;
        area / 3.0 * (f(m1) + f(m2) + f(m3))
    }

    #[test]
    fn single_dirac_gives_constant_map() {
        let domain = ConvexPolygon::unit_square();
        let y = Point2::new(0.3, 0.8);
        let mu = DiscreteMeasure::dirac(y).unwrap();
        let map = monge_map(&domain, &mu, &SolveConfig::default()).unwrap();
        assert_eq!(map.eval(Point2::new(0.9, 0.1)), Some(y));
        let v = vectorize(&map, 4).unwrap();
        for s in 0..4 {
            for t in 0..4 {
                assert!(v.get(s, t).dist(y) <= 1e-12);
            }
        }
    }

    #[test]
    fn fine_grid_measure_map_is_near_identity() {
        // Cells of the 32×32 grid measure are the grid cells themselves, so
        // ‖T − id‖² = Σ_i ∫_{V_i} ‖x − y_i‖² dx, computed exactly by
        // fan-triangulating each cell (the integrand is quadratic).
        let domain = ConvexPolygon::unit_square();
        let mu = grid_measure(32);
        let map = monge_map(&domain, &mu, &SolveConfig::default()).unwrap();
        let mut dist_sq = 0.0;
        for (i, cell) in map.diagram().cells().iter().enumerate() {
            let y = map.targets()[i];
            let vs = cell.vertices();
            for k in 1..vs.len() - 1 {
                dist_sq += triangle_quadratic_integral(vs[0], vs[k], vs[k + 1], |x| {
                    (x - y).norm_sq()
                });
            }
        }
        let dist = dist_sq.max(0.0).sqrt();
        // Within a grid cell of width h, the RMS distance to the center is
        // h/√6 ≈ 0.01276 for h = 1/32.
        let expected = (1.0 / 32.0) / 6.0f64.sqrt();
        assert!(close(dist, expected, 2e-3), "distance {dist}");
        assert!(dist < 0.02);
    }

    #[test]
    fn antipodal_diracs_split_disc_in_halves() {
        let disc = regular_polygon_disc(256);
        let theta: f64 = 0.4;
        let x_t = Point2::new(theta.cos(), theta.sin());
        let mu = DiscreteMeasure::uniform(SiteSet::new(vec![x_t, -x_t]).unwrap());
        let map = monge_map(&disc, &mu, &SolveConfig::default()).unwrap();
        let masses = map.diagram().masses();
        assert!(close(masses[0], 0.5, 1e-9));
        assert!(close(masses[1], 0.5, 1e-9));
        // The cell of x_θ is the half-disc on its side of the diameter.
        for v in map.diagram().cell(0).vertices() {
            assert!(v.dot(x_t) >= -1e-9);
        }
        for v in map.diagram().cell(1).vertices() {
            assert!(v.dot(x_t) <= 1e-9);
        }
    }

    #[test]
    fn antipodal_family_distance_matches_disc_formula() {
        // On the exact disc: ‖T_θ − T_0‖² = 2 − 2cosθ + 4θcosθ/π.
        let disc = regular_polygon_disc(256);
        let config = SolveConfig::default();
        let base = DiscreteMeasure::uniform(
            SiteSet::new(vec![Point2::new(1.0, 0.0), Point2::new(-1.0, 0.0)]).unwrap(),
        );
        let map0 = monge_map(&disc, &base, &config).unwrap();
        for theta in [0.1f64, 0.3, 0.5] {
            let x_t = Point2::new(theta.cos(), theta.sin());
            let mu = DiscreteMeasure::uniform(SiteSet::new(vec![x_t, -x_t]).unwrap());
            let map_t = monge_map(&disc, &mu, &config).unwrap();
            let d = exact_l2_distance(&map_t, &map0).unwrap();
            let analytic =
                2.0 - 2.0 * theta.cos() + 4.0 * theta * theta.cos() / std::f64::consts::PI;
            assert!(
                close(d * d, analytic, 1e-2),
                "theta {theta}: {} vs {analytic}",
                d * d
            );
            assert!(d * d >= theta / std::f64::consts::PI - 1e-2);
        }
    }

    #[test]
    fn vectorize_bisector_split() {
        let domain = ConvexPolygon::unit_square();
        let sites = SiteSet::new(vec![Point2::new(0.25, 0.5), Point2::new(0.75, 0.5)]).unwrap();
        let mu = DiscreteMeasure::uniform(sites.clone());
        let map = monge_map(&domain, &mu, &SolveConfig::default()).unwrap();
        let v = vectorize(&map, 2).unwrap();
        for t in 0..2 {
            assert!(v.get(0, t).dist(Point2::new(0.25, 0.5)) <= 1e-9);
            assert!(v.get(1, t).dist(Point2::new(0.75, 0.5)) <= 1e-9);
        }
    }

    #[test]
    fn vectorize_weighted_average_at_m1() {
        // Boundary at x = 0.25 gives the single grid value
        // 0.25·y₁ + 0.75·y₂.
        let domain = ConvexPolygon::unit_square();
        let sites = SiteSet::new(vec![Point2::new(0.25, 0.5), Point2::new(0.75, 0.5)]).unwrap();
        let psi = Potential::new(vec![0.0, 0.125]).unwrap();
        let diag = LaguerreDiagram::new(&domain, &sites, &psi).unwrap();
        let map = MongeMap::from_diagram(diag);
        let v = vectorize(&map, 1).unwrap();
        let expected = Point2::new(0.25, 0.5) * 0.25 + Point2::new(0.75, 0.5) * 0.75;
        assert!(v.get(0, 0).dist(expected) <= 1e-12);
    }

    #[test]
    fn vector_distance_basics() {
        let a = VectorizedEmbedding::constant(3, Point2::new(0.2, 0.2));
        let b = VectorizedEmbedding::constant(3, Point2::new(0.6, 0.5));
        assert_eq!(vector_distance(&a, &a).unwrap(), 0.0);
        let d = vector_distance(&a, &b).unwrap();
        assert!(close(d, 0.5, 1e-12));
        let c = VectorizedEmbedding::constant(4, Point2::ZERO);
        assert!(matches!(
            vector_distance(&a, &c),
            Err(EmbedError::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn projection_contracts_and_refines() {
        let mut rng = StdRng::seed_from_u64(7);
        let domain = ConvexPolygon::unit_square();
        let config = SolveConfig::default();
        for _ in 0..3 {
            let a = monge_map(&domain, &random_cloud(12, &mut rng), &config).unwrap();
            let b = monge_map(&domain, &random_cloud(15, &mut rng), &config).unwrap();
            let exact = exact_l2_distance(&a, &b).unwrap();
            let mut prev = 0.0;
            for m in [4, 8, 16] {
                let va = vectorize(&a, m).unwrap();
                let vb = vectorize(&b, m).unwrap();
                let d = vector_distance(&va, &vb).unwrap();
                assert!(d <= exact + 1e-10, "m={m}: {d} > {exact}");
                assert!(d >= prev - 1e-12, "m={m}: not monotone");
                prev = d;
            }
        }
    }

    #[test]
    fn reverse_lipschitz_on_random_pairs() {
        let mut rng = StdRng::seed_from_u64(13);
        let domain = ConvexPolygon::unit_square();
        let config = SolveConfig::default();
        for _ in 0..5 {
            let mu = random_cloud(10, &mut rng);
            let nu = random_cloud(14, &mut rng);
            let (w2, _) = wasserstein_exact(&mu, &nu, 2).unwrap();
            let ta = monge_map(&domain, &mu, &config).unwrap();
            let tb = monge_map(&domain, &nu, &config).unwrap();
            let d = exact_l2_distance(&ta, &tb).unwrap();
            assert!(w2 <= d + 1e-6, "W2 {w2} > map distance {d}");
        }
    }

    #[test]
    fn embedding_injective_at_desk_scale() {
        let mut rng = StdRng::seed_from_u64(29);
        let domain = ConvexPolygon::unit_square();
        let config = SolveConfig::default();
        let mu = random_cloud(8, &mut rng);
        let ta = monge_map(&domain, &mu, &config).unwrap();
        let tb = monge_map(&domain, &mu, &config).unwrap();
        let d = exact_l2_distance(&ta, &tb).unwrap();
        assert!(d <= 1e-6);
        assert!(tv_distance(&mu, &mu) == 0.0);
        let nu = random_cloud(8, &mut rng);
        let tc = monge_map(&domain, &nu, &config).unwrap();
        assert!(exact_l2_distance(&ta, &tc).unwrap() > 1e-3);
    }

    #[test]
    fn dual_potential_lipschitz_and_sup_bounds() {
        let mut rng = StdRng::seed_from_u64(37);
        let domain = ConvexPolygon::unit_square();
        let m_x = domain.max_norm();
        assert!(close(m_x, std::f64::consts::SQRT_2, 1e-15));
        for _ in 0..3 {
            let mu = random_cloud(20, &mut rng);
            let report = solve_semidiscrete(&domain, &mu, &SolveConfig::default()).unwrap();
            let psi = &report.potential;
            let pts = mu.points();
            for i in 0..mu.len() {
                for j in (i + 1)..mu.len() {
                    assert!(
                        (psi[i] - psi[j]).abs() <= m_x * pts[i].dist(pts[j]) + 1e-9,
                        "Lipschitz bound violated at ({i},{j})"
                    );
                }
            }
            let diam = mu.sites().diameter();
            for i in 0..mu.len() {
                assert!(psi[i].abs() <= m_x * diam + 1e-9);
            }
        }
    }

    #[test]
    fn barycenter_basics() {
        let a = VectorizedEmbedding::constant(2, Point2::new(0.2, 0.4));
        let b = VectorizedEmbedding::constant(2, Point2::new(0.8, 0.0));
        let first = barycenter_embedding(&[a.clone(), b.clone()], &[1.0, 0.0]).unwrap();
        assert_eq!(first, a);
        let mid = barycenter_embedding(&[a.clone(), b.clone()], &[0.5, 0.5]).unwrap();
        assert!(mid.get(0, 0).dist(Point2::new(0.5, 0.2)) <= 1e-12);
        assert!(matches!(
            barycenter_embedding(&[a.clone(), b.clone()], &[0.7, 0.7]),
            Err(EmbedError::BadWeights(_))
        ));
        assert!(matches!(
            barycenter_embedding(&[a, b], &[1.0]),
            Err(EmbedError::BadWeights(_))
        ));
    }

    #[test]
    fn barycenter_is_hilbert_minimizer() {
        // The weighted mean beats nearby perturbations on the weighted sum
        // of squared distances.
        let mut rng = StdRng::seed_from_u64(41);
        let m = 3;
        let embeds: Vec<VectorizedEmbedding> = (0..3)
            .map(|_| {
                VectorizedEmbedding::new(
                    m,
                    (0..m * m)
                        .map(|_| Point2::new(rng.gen(), rng.gen()))
                        .collect(),
                )
            })
            .collect();
        let lambdas = [0.5, 0.3, 0.2];
        let bary = barycenter_embedding(&embeds, &lambdas).unwrap();
        let objective = |v: &VectorizedEmbedding| -> f64 {
            embeds
                .iter()
                .zip(&lambdas)
                .map(|(e, &l)| l * vector_distance(v, e).unwrap().powi(2))
                .sum()
        };
        let base = objective(&bary);
        for _ in 0..20 {
            let perturbed = VectorizedEmbedding::new(
                m,
                bary.values()
                    .iter()
                    .map(|&p| p + Point2::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.1)
                    .collect(),
            );
            assert!(objective(&perturbed) >= base - 1e-12);
        }
    }

    #[test]
    fn translation_equivariance_of_barycenter() {
        let mut rng = StdRng::seed_from_u64(47);
        let domain = ConvexPolygon::unit_square();
        let config = SolveConfig::default();
        let pts: Vec<Point2> = (0..10)
            .map(|_| Point2::new(0.1 + 0.5 * rng.gen::<f64>(), 0.1 + 0.5 * rng.gen::<f64>()))
            .collect();
        let mu = DiscreteMeasure::uniform(SiteSet::new(pts).unwrap());
        let c = Point2::new(0.25, 0.2);
        let mu_shift = mu.translated(c).unwrap();
        let m = 16;
        let e0 = vectorize(&monge_map(&domain, &mu, &config).unwrap(), m).unwrap();
        let e1 = vectorize(&monge_map(&domain, &mu_shift, &config).unwrap(), m).unwrap();
        let bary = barycenter_embedding(&[e0.clone(), e1], &[0.5, 0.5]).unwrap();
        for (v, w) in bary.values().iter().zip(e0.values()) {
            assert!(v.dist(*w + c * 0.5) <= 1e-6);
        }
    }

    #[test]
    fn pushforward_examples() {
        let y = Point2::new(0.3, 0.3);
        let constant = VectorizedEmbedding::constant(4, y);
        let delta = pushforward_measure(&constant);
        assert_eq!(delta.len(), 1);
        assert!(delta.points()[0].dist(y) <= 1e-12);

        let domain = ConvexPolygon::unit_square();
        let sites = SiteSet::new(vec![Point2::new(0.25, 0.5), Point2::new(0.75, 0.5)]).unwrap();
        let mu = DiscreteMeasure::uniform(sites);
        let map = monge_map(&domain, &mu, &SolveConfig::default()).unwrap();
        let push = pushforward_measure(&vectorize(&map, 2).unwrap());
        assert_eq!(push.len(), 2);
        assert!(close(push.weights()[0], 0.5, 1e-12));
    }

    #[test]
    fn pushforward_close_to_original_measure() {
        let mut rng = StdRng::seed_from_u64(53);
        let domain = ConvexPolygon::unit_square();
        let mu = random_cloud(6, &mut rng);
        let map = monge_map(&domain, &mu, &SolveConfig::default()).unwrap();
        let m = 8;
        let push = pushforward_measure(&vectorize(&map, m).unwrap());
        let (w2, _) = wasserstein_exact(&push, &mu, 2).unwrap();
        let bound = 2.0 * std::f64::consts::SQRT_2 / m as f64 + 1e-6;
        assert!(w2 <= bound, "W2 {w2} above cell-diameter bound {bound}");
    }
}
