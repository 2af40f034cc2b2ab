//! Experiment drivers: distance scatters, sampling curves, the
//! antipodal-Dirac rate family, stability suites and barycenter grids.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde_json::json;

use crate::embedding::{
    barycenter_embedding, exact_l2_distance, monge_map, pushforward_measure, vector_distance,
    vectorize, MongeMap, VectorizedEmbedding,
};
use crate::geometry::{regular_polygon_disc, ConvexPolygon, LaguerreDiagram, Point2, Potential, SiteSet};
use crate::io::measure_from_atoms;
use crate::measure::DiscreteMeasure;
use crate::metrics::{holder_fit, sinkhorn, tv_distance, wasserstein_exact};
use crate::solver::{mass_jacobian, solve_semidiscrete, SolveConfig};

use super::{derive_seed, ExperimentError, ExperimentRecord, FamilySpec, PrescribedMap};

/// Smallest radius of an origin-centered ball containing the unit square.
const M_X_UNIT_SQUARE: f64 = std::f64::consts::SQRT_2;

fn random_support(n: usize, rng: &mut StdRng) -> SiteSet {
    loop {
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        if let Ok(sites) = SiteSet::new(pts) {
            return sites;
        }
    }
}

fn random_weights(n: usize, rng: &mut StdRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.gen::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Configuration of the pairwise-distance scatter.
#[derive(Clone, Debug)]
pub struct ScatterConfig {
    pub clouds: usize,
    pub n_points: usize,
    pub m: usize,
    /// Also record the entropic approximation of W₂ per pair.
    pub with_sinkhorn: bool,
    pub sinkhorn_epsilon: f64,
    pub solve: SolveConfig,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            clouds: 20,
            n_points: 150,
            m: 64,
            with_sinkhorn: false,
            sinkhorn_epsilon: 2e-3,
            solve: SolveConfig::default(),
        }
    }
}

/// All pairwise `(W₂ exact, W_{2,ρ})` distances between clouds sampled from
/// one family. Per pair the record carries the vectorized surrogate, the
/// exact overlay distance, and a reverse-Lipschitz flag
/// `W₂ ≤ ‖T_μ − T_ν‖ + 1e-6` evaluated on the exact distance.
pub fn distance_scatter(
    spec: &FamilySpec,
    cfg: &ScatterConfig,
    seed: u64,
) -> Result<ExperimentRecord, ExperimentError> {
    let domain = ConvexPolygon::unit_square();
    // Each cloud draws its own distribution parameters from the family.
    let clouds: Vec<DiscreteMeasure> = (0..cfg.clouds)
        .map(|i| {
            let cloud_spec =
                FamilySpec::new(spec.kind, derive_seed(spec.param_seed, 0xC10D, i as u64));
            super::sample_family(&cloud_spec, cfg.n_points, derive_seed(seed, 1, i as u64))
        })
        .collect();
    let maps: Vec<MongeMap> = clouds
        .par_iter()
        .map(|mu| monge_map(&domain, mu, &cfg.solve))
        .collect::<Result<_, _>>()?;
    let embeddings: Vec<VectorizedEmbedding> = maps
        .par_iter()
        .map(|map| vectorize(map, cfg.m))
        .collect::<Result<_, _>>()?;

    let pairs: Vec<(usize, usize)> = (0..cfg.clouds)
        .flat_map(|i| ((i + 1)..cfg.clouds).map(move |j| (i, j)))
        .collect();
    let rows: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Vec<f64>, ExperimentError> {
            let (w2, _) = wasserstein_exact(&clouds[i], &clouds[j], 2)?;
            let w2rho_vec = vector_distance(&embeddings[i], &embeddings[j])?;
            let w2rho_exact = exact_l2_distance(&maps[i], &maps[j])?;
            let ok = if w2 <= w2rho_exact + 1e-6 { 1.0 } else { 0.0 };
            let mut row = vec![i as f64, j as f64, w2, w2rho_vec, w2rho_exact, ok];
            if cfg.with_sinkhorn {
                row.push(sinkhorn(
                    &clouds[i],
                    &clouds[j],
                    cfg.sinkhorn_epsilon,
                    100_000,
                    1e-8,
                )?);
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;

    let mut columns = vec!["i", "j", "w2_exact", "w2rho_vector", "w2rho_exact", "reverse_lipschitz_ok"];
    if cfg.with_sinkhorn {
        columns.push("w2_sinkhorn");
    }
    let mut record = ExperimentRecord::new(
        "distance_scatter",
        json!({
            "family": spec.kind.name(),
            "param_seed": spec.param_seed,
            "per_cloud_parameters": "derived from param_seed per cloud index",
            "clouds": cfg.clouds,
            "n_points": cfg.n_points,
            "m": cfg.m,
            "with_sinkhorn": cfg.with_sinkhorn,
            "sinkhorn_epsilon": cfg.sinkhorn_epsilon,
            "seed": seed,
            "tol_residual": cfg.solve.tol_residual,
        }),
        &columns,
    );
    for row in rows {
        record.push(row);
    }
    Ok(record)
}

/// What the sampling curve converges to.
#[derive(Clone, Debug)]
pub enum SamplingTarget {
    /// Closed-form map; the reference embedding is its exact projection.
    Prescribed(PrescribedMap),
    /// A fixed discrete measure standing in for the population; the
    /// reference is its own embedding and draws resample its atoms.
    Empirical(DiscreteMeasure),
}

impl SamplingTarget {
    fn name(&self) -> String {
        match self {
            SamplingTarget::Prescribed(map) => format!("prescribed:{}", map.name()),
            SamplingTarget::Empirical(mu) => format!("empirical:{}", mu.len()),
        }
    }
}

/// Embedding distance `‖Π_m T_μ − Π_m T_{μ_N}‖` as a function of the sample
/// count `N`, repeated with independent draws.
pub fn sampling_curve(
    target: &SamplingTarget,
    ns: &[usize],
    repeats: usize,
    m: usize,
    seed: u64,
    solve: &SolveConfig,
) -> Result<ExperimentRecord, ExperimentError> {
    assert!(ns.windows(2).all(|w| w[0] < w[1]), "ns must increase");
    let domain = ConvexPolygon::unit_square();
    let reference = match target {
        SamplingTarget::Prescribed(map) => map.vectorized(m, 8),
        SamplingTarget::Empirical(mu) => vectorize(&monge_map(&domain, mu, solve)?, m)?,
    };

    let jobs: Vec<(usize, usize)> = ns
        .iter()
        .flat_map(|&n| (0..repeats).map(move |r| (n, r)))
        .collect();
    let rows: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(n, repeat)| -> Result<Vec<f64>, ExperimentError> {
            let job_seed = derive_seed(seed, 2, (n as u64) << 20 | repeat as u64);
            let mut rng = StdRng::seed_from_u64(job_seed);
            let sample = draw_from_target(target, n, &mut rng)?;
            let embedded = vectorize(&monge_map(&domain, &sample, solve)?, m)?;
            let distance = vector_distance(&embedded, &reference)?;
            Ok(vec![n as f64, repeat as f64, distance])
        })
        .collect::<Result<_, _>>()?;

    let mut record = ExperimentRecord::new(
        "sampling_curve",
        json!({
            "target": target.name(),
            "ns": ns,
            "repeats": repeats,
            "m": m,
            "seed": seed,
            "tol_residual": solve.tol_residual,
        }),
        &["n", "repeat", "distance"],
    );
    for row in rows {
        record.push(row);
    }
    Ok(record)
}

fn draw_from_target(
    target: &SamplingTarget,
    n: usize,
    rng: &mut StdRng,
) -> Result<DiscreteMeasure, ExperimentError> {
    let mut atoms: Vec<(Point2, f64)> = Vec::with_capacity(n);
    match target {
        SamplingTarget::Prescribed(map) => {
            for _ in 0..n {
                let x = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
                atoms.push((map.gradient(x), 1.0));
            }
        }
        SamplingTarget::Empirical(mu) => {
            let weights = mu.weights();
            for _ in 0..n {
                let mut target_w = rng.gen::<f64>();
                let mut idx = mu.len() - 1;
                for (i, &w) in weights.iter().enumerate() {
                    target_w -= w;
                    if target_w <= 0.0 {
                        idx = i;
                        break;
                    }
                }
                atoms.push((mu.points()[idx], 1.0));
            }
        }
    }
    Ok(measure_from_atoms(atoms)?)
}

/// Per-`n` mean and standard deviation of a sampling-curve record.
pub fn summarize_sampling(record: &ExperimentRecord) -> ExperimentRecord {
    let ns = record.column("n");
    let distances = record.column("distance");
    let mut unique: Vec<f64> = Vec::new();
    for &n in &ns {
        if !unique.contains(&n) {
            unique.push(n);
        }
    }
    let mut summary = ExperimentRecord::new(
        "sampling_curve_summary",
        record.config.clone(),
        &["n", "mean", "std"],
    );
    for &n in &unique {
        let vals: Vec<f64> = ns
            .iter()
            .zip(&distances)
            .filter(|&(&ni, _)| ni == n)
            .map(|(_, &d)| d)
            .collect();
        let count = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / count;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        summary.push(vec![n, mean, var.sqrt()]);
    }
    summary
}

/// The antipodal-Dirac curve on a polygonal disc: the family whose map
/// distance scales like the square root of W₂.
///
/// Each row checks the rate bound `‖T_θ − T_0‖² ≥ θ/π − 10⁻²`.
pub fn onehalf_experiment(
    k_gon: usize,
    thetas: &[f64],
    solve: &SolveConfig,
) -> Result<ExperimentRecord, ExperimentError> {
    assert!(k_gon >= 64, "disc approximation needs at least 64 vertices");
    assert!(
        thetas
            .iter()
            .all(|&t| t > 0.0 && t <= std::f64::consts::FRAC_PI_2),
        "thetas must lie in (0, π/2]"
    );
    let disc = regular_polygon_disc(k_gon);
    let antipodal = |theta: f64| -> Result<DiscreteMeasure, ExperimentError> {
        let x = Point2::new(theta.cos(), theta.sin());
        Ok(DiscreteMeasure::uniform(SiteSet::new(vec![x, -x])?))
    };
    let mu0 = antipodal(0.0)?;
    let map0 = monge_map(&disc, &mu0, solve)?;

    let mut record = ExperimentRecord::new(
        "onehalf",
        json!({
            "k_gon": k_gon,
            "thetas": thetas,
            "tol_residual": solve.tol_residual,
        }),
        &["theta", "w2", "map_distance", "rate_bound", "rate_ok"],
    );
    for &theta in thetas {
        let mu = antipodal(theta)?;
        let map = monge_map(&disc, &mu, solve)?;
        let (w2, _) = wasserstein_exact(&mu0, &mu, 2)?;
        let d = exact_l2_distance(&map, &map0)?;
        let bound = theta / std::f64::consts::PI - 1e-2;
        let ok = if d * d >= bound { 1.0 } else { 0.0 };
        record.push(vec![theta, w2, d, bound, ok]);
        debug_assert!(w2 <= theta + 1e-9);
    }
    Ok(record)
}

/// Output of [`stability_suite`]: the raw rows plus per-family fitted
/// exponents of the potential stability quantity against TV and W₁.
#[derive(Clone, Debug)]
pub struct StabilityOutcome {
    pub record: ExperimentRecord,
    pub tv_exponents: Vec<f64>,
    pub w1_exponents: Vec<f64>,
}

/// Interpolation families `μ^t = (1−t)μ⁰ + tμ¹` on a common support.
///
/// Rows record the potential-stability quantity
/// `⟨(ψ^t − ψ⁰)², G(ψ⁰) + G(ψ^t)⟩` against `TV(μ⁰, μ^t)` and
/// `W₁(μ⁰, μ^t)`, the map distance, and per-row checks of the
/// Brunn–Minkowski cell interpolation and the Poincaré structure.
pub fn stability_suite(
    sizes: &[usize],
    trials: usize,
    steps: usize,
    seed: u64,
    solve: &SolveConfig,
) -> Result<StabilityOutcome, ExperimentError> {
    assert!(steps >= 3);
    let domain = ConvexPolygon::unit_square();
    let mut record = ExperimentRecord::new(
        "stability",
        json!({
            "sizes": sizes,
            "trials": trials,
            "steps": steps,
            "seed": seed,
            "tol_residual": solve.tol_residual,
        }),
        &[
            "n",
            "trial",
            "t",
            "tv",
            "w1",
            "psi_lhs",
            "map_distance",
            "bm_ok",
            "poincare_ok",
        ],
    );
    let mut tv_exponents = Vec::new();
    let mut w1_exponents = Vec::new();

    for (si, &n) in sizes.iter().enumerate() {
        for trial in 0..trials {
            let mut rng =
                StdRng::seed_from_u64(derive_seed(seed, 3, (si as u64) << 32 | trial as u64));
            let support = random_support(n, &mut rng);
            let w0 = random_weights(n, &mut rng);
            let w1_target = random_weights(n, &mut rng);
            let mu0 = DiscreteMeasure::new_normalized(support.clone(), w0.clone())?;
            let mu1 = DiscreteMeasure::new_normalized(support.clone(), w1_target.clone())?;

            let report0 = solve_semidiscrete(&domain, &mu0, solve)?;
            let report1 = solve_semidiscrete(&domain, &mu1, solve)?;
            let psi0 = report0.potential.clone();
            let psi1 = report1.potential.clone();
            let diag0 = LaguerreDiagram::new(&domain, &support, &psi0)?;
            let map0 = MongeMap::from_diagram(diag0.clone());

            let mut tv_pairs = Vec::with_capacity(steps);
            let mut w1_pairs = Vec::with_capacity(steps);
            for step in 1..=steps {
                let t = step as f64 / steps as f64;
                let weights: Vec<f64> = w0
                    .iter()
                    .zip(&w1_target)
                    .map(|(&a, &b)| (1.0 - t) * a + t * b)
                    .collect();
                let mu_t = DiscreteMeasure::new_normalized(support.clone(), weights)?;
                let report_t = solve_semidiscrete(&domain, &mu_t, solve)?;
                let psi_t = report_t.potential;
                let diag_t = LaguerreDiagram::new(&domain, &support, &psi_t)?;

                let tv = tv_distance(&mu0, &mu_t);
                let (w1d, _) = wasserstein_exact(&mu0, &mu_t, 1)?;
                let lhs: f64 = (0..n)
                    .map(|i| {
                        let d = psi_t[i] - psi0[i];
                        d * d * (diag0.masses()[i] + diag_t.masses()[i])
                    })
                    .sum();
                let map_t = MongeMap::from_diagram(diag_t.clone());
                let map_dist = exact_l2_distance(&map_t, &map0)?;

                let bm_ok = brunn_minkowski_ok(&domain, &support, &psi0, &psi1, t)?;
                let poincare_ok = poincare_ok(&diag_t, &mut rng)?;

                record.push(vec![
                    n as f64,
                    trial as f64,
                    t,
                    tv,
                    w1d,
                    lhs,
                    map_dist,
                    if bm_ok { 1.0 } else { 0.0 },
                    if poincare_ok { 1.0 } else { 0.0 },
                ]);
                tv_pairs.push((tv, lhs));
                w1_pairs.push((w1d, lhs));
            }
            tv_exponents.push(holder_fit(&tv_pairs)?.slope);
            w1_exponents.push(holder_fit(&w1_pairs)?.slope);
        }
    }
    Ok(StabilityOutcome {
        record,
        tv_exponents,
        w1_exponents,
    })
}

/// Checks the cell-mass interpolation inequalities between two potentials.
fn brunn_minkowski_ok(
    domain: &ConvexPolygon,
    support: &SiteSet,
    psi0: &Potential,
    psi1: &Potential,
    t: f64,
) -> Result<bool, ExperimentError> {
    let g0 = LaguerreDiagram::new(domain, support, psi0)?;
    let g1 = LaguerreDiagram::new(domain, support, psi1)?;
    let interp: Vec<f64> = psi0
        .values()
        .iter()
        .zip(psi1.values())
        .map(|(&a, &b)| (1.0 - t) * a + t * b)
        .collect();
    let gt = LaguerreDiagram::new(domain, support, &Potential::new(interp)?)?;
    let tol = 1e-8;
    for i in 0..support.len() {
        let lhs = gt.masses()[i].sqrt();
        let rhs = (1.0 - t) * g0.masses()[i].sqrt() + t * g1.masses()[i].sqrt();
        if lhs < rhs - tol {
            return Ok(false);
        }
    }
    let l1 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
    };
    let d0t = l1(gt.masses(), g0.masses());
    let d01 = l1(g1.masses(), g0.masses());
    Ok(d0t <= d01 + tol && d0t <= 2.0 * (1.0 - (1.0 - t) * (1.0 - t)) + tol)
}

/// Variance vs Dirichlet-energy structure of the mass Jacobian.
fn poincare_ok(diag: &LaguerreDiagram, rng: &mut StdRng) -> Result<bool, ExperimentError> {
    let jac = mass_jacobian(diag)?;
    let n = diag.len();
    for _ in 0..4 {
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let g = diag.masses();
        let mean: f64 = v.iter().zip(g).map(|(&x, &w)| x * w).sum();
        let second: f64 = v.iter().zip(g).map(|(&x, &w)| x * x * w).sum();
        let variance = second - mean * mean;
        let dirichlet = -jac.quad_form(&v);
        if variance < -1e-12 || dirichlet < -1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks `‖T_μ − T_ν‖ ≤ 2√(M_X·K)·W₁(μ,ν)^{1/2}` with `K = 1` for a fine
/// grid discretization `μ` of the uniform density, with multiplicative
/// slack 0.25 absorbing the discretization of `μ`.
pub fn regular_bound_check(
    n_grid: usize,
    perturbations: usize,
    nu_atoms: usize,
    seed: u64,
    solve: &SolveConfig,
) -> Result<ExperimentRecord, ExperimentError> {
    let domain = ConvexPolygon::unit_square();
    let mut atoms = Vec::with_capacity(n_grid * n_grid);
    for s in 0..n_grid {
        for t in 0..n_grid {
            atoms.push((
                Point2::new(
                    (s as f64 + 0.5) / n_grid as f64,
                    (t as f64 + 0.5) / n_grid as f64,
                ),
                1.0,
            ));
        }
    }
    let mu = measure_from_atoms(atoms)?;
    let map_mu = monge_map(&domain, &mu, solve)?;

    let mut record = ExperimentRecord::new(
        "regular_bound",
        json!({
            "n_grid": n_grid,
            "perturbations": perturbations,
            "nu_atoms": nu_atoms,
            "seed": seed,
            "slack": 0.25,
            "m_x": M_X_UNIT_SQUARE,
        }),
        &["k", "w1", "map_distance", "bound", "ok"],
    );
    for k in 0..perturbations {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, 4, k as u64));
        let nu = DiscreteMeasure::uniform(random_support(nu_atoms, &mut rng));
        let map_nu = monge_map(&domain, &nu, solve)?;
        let (w1, _) = wasserstein_exact(&mu, &nu, 1)?;
        let d = exact_l2_distance(&map_mu, &map_nu)?;
        let bound = 2.0 * M_X_UNIT_SQUARE.sqrt() * w1.sqrt() * 1.25;
        let ok = if d <= bound { 1.0 } else { 0.0 };
        record.push(vec![k as f64, w1, d, bound, ok]);
    }
    Ok(record)
}

/// A `k × k` grid of barycenters with bilinear weights over four corner
/// measures, rendered as pushforward point clouds.
pub struct BarycenterGrid {
    pub record: ExperimentRecord,
    /// `(a, b, measure)` for each grid position, `a` and `b` in `0..k`.
    pub measures: Vec<(usize, usize, DiscreteMeasure)>,
}

/// Corner order: `[bottom-left, bottom-right, top-left, top-right]`;
/// position `(a, b)` uses weights
/// `((1−α)(1−β), α(1−β), (1−α)β, αβ)` with `α = a/(k−1)`, `β = b/(k−1)`.
pub fn barycenter_grid(
    corners: &[DiscreteMeasure; 4],
    grid_k: usize,
    m: usize,
    solve: &SolveConfig,
) -> Result<BarycenterGrid, ExperimentError> {
    assert!(grid_k >= 2);
    let domain = ConvexPolygon::unit_square();
    let embeddings: Vec<VectorizedEmbedding> = corners
        .par_iter()
        .map(|mu| -> Result<VectorizedEmbedding, ExperimentError> {
            Ok(vectorize(&monge_map(&domain, mu, solve)?, m)?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let mut record = ExperimentRecord::new(
        "barycenter_grid",
        json!({
            "grid_k": grid_k,
            "m": m,
            "corner_sizes": corners.iter().map(|c| c.len()).collect::<Vec<_>>(),
            "tol_residual": solve.tol_residual,
        }),
        &["a", "b", "l00", "l10", "l01", "l11", "atoms"],
    );
    let mut measures = Vec::with_capacity(grid_k * grid_k);
    for a in 0..grid_k {
        for b in 0..grid_k {
            let alpha = a as f64 / (grid_k - 1) as f64;
            let beta = b as f64 / (grid_k - 1) as f64;
            let lambdas = [
                (1.0 - alpha) * (1.0 - beta),
                alpha * (1.0 - beta),
                (1.0 - alpha) * beta,
                alpha * beta,
            ];
            let bary = barycenter_embedding(&embeddings, &lambdas)?;
            let cloud = pushforward_measure(&bary);
            record.push(vec![
                a as f64,
                b as f64,
                lambdas[0],
                lambdas[1],
                lambdas[2],
                lambdas[3],
                cloud.len() as f64,
            ]);
            measures.push((a, b, cloud));
        }
    }
    Ok(BarycenterGrid { record, measures })
}
