//! Fast, named checks of every module invariant; the CLI `check` command
//! runs these and reports one pass/fail line each.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::embedding::{
    exact_l2_distance, monge_map, vector_distance, vectorize,
};
use crate::geometry::{
    diagram_overlay, ConvexPolygon, LaguerreDiagram, Point2, Potential, SiteSet, TOL_GEO,
};
use crate::io::{embedding_from_bytes, embedding_to_bytes, parse_point_cloud, point_cloud_to_csv};
use crate::measure::DiscreteMeasure;
use crate::metrics::{sinkhorn, tv_distance, wasserstein_exact};
use crate::solver::{
    kantorovich_value, mass_jacobian, solve_semidiscrete, SolveConfig,
};

use super::suites::{distance_scatter, sampling_curve, SamplingTarget, ScatterConfig};
use super::{derive_seed, spearman, FamilyKind, FamilySpec, PrescribedMap};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Check = (&'static str, fn(u64) -> Result<(), String>);

/// Runs the full invariant suite; deterministic per seed.
pub fn run_check_suite(seed: u64) -> Vec<CheckResult> {
    let checks: Vec<Check> = vec![
        ("geometry/partition-of-unity", check_partition_of_unity),
        ("geometry/cell-convexity", check_cell_convexity),
        ("geometry/interface-symmetry", check_interface_symmetry),
        ("geometry/constant-shift-cells", check_constant_shift),
        ("geometry/voronoi-reduction", check_voronoi_reduction),
        ("geometry/overlay-total-mass", check_overlay_total),
        ("solver/gradient-finite-difference", check_gradient_fd),
        ("solver/jacobian-finite-difference", check_jacobian_fd),
        ("solver/objective-shift-invariance", check_objective_shift),
        ("solver/monotone-damping", check_monotone_damping),
        ("solver/hessian-kernel-constants", check_hessian_kernel),
        ("solver/brunn-minkowski-cells", check_brunn_minkowski),
        ("solver/poincare-structure", check_poincare),
        ("embedding/reverse-lipschitz", check_reverse_lipschitz),
        ("embedding/injectivity", check_injectivity),
        ("embedding/projection-contraction", check_projection_contraction),
        ("embedding/refinement-monotonicity", check_refinement_monotonicity),
        ("embedding/dual-potential-bounds", check_dual_potential_bounds),
        ("metrics/metric-axioms", check_metric_axioms),
        ("metrics/wasserstein-ordering", check_wasserstein_ordering),
        ("metrics/w1-duality-lower-bound", check_w1_duality),
        ("metrics/sinkhorn-bias-monotone", check_sinkhorn_bias),
        ("experiments/determinism", check_determinism),
        ("experiments/scatter-reverse-lipschitz", check_scatter_flags),
        ("experiments/sampling-curve-decreasing", check_sampling_trend),
        ("experiments/exponent-windows", check_exponent_windows),
        ("io/embedding-roundtrip", check_embedding_roundtrip),
        ("io/pointcloud-roundtrip", check_pointcloud_roundtrip),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f(seed) {
            Ok(()) => CheckResult {
                name: name.to_string(),
                passed: true,
                detail: String::new(),
            },
            Err(detail) => CheckResult {
                name: name.to_string(),
                passed: false,
                detail,
            },
        })
        .collect()
}

fn rng_for(seed: u64, tag: u64) -> StdRng {
    StdRng::seed_from_u64(derive_seed(seed, 0xC0DE, tag))
}

fn random_sites(n: usize, rng: &mut StdRng) -> SiteSet {
    loop {
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        if let Ok(s) = SiteSet::new(pts) {
            return s;
        }
    }
}

// Voronoi potential plus a perturbation; the scale shrinks with the site
// count (cells are ~1/n in area) and halves on retries so sampling S+
// always terminates.
fn random_splus_diagram(
    domain: &ConvexPolygon,
    sites: &SiteSet,
    rng: &mut StdRng,
) -> (Potential, LaguerreDiagram) {
    let mut scale = 0.5 / sites.len() as f64;
    let mut attempts = 0;
    loop {
        let values: Vec<f64> = sites
            .points()
            .iter()
            .map(|y| 0.5 * y.norm_sq() + scale * (rng.gen::<f64>() - 0.5))
            .collect();
        let psi = Potential::new(values).unwrap();
        let diag = LaguerreDiagram::new(domain, sites, &psi).unwrap();
        if diag.min_mass() > 1e-8 {
            return (psi, diag);
        }
        attempts += 1;
        if attempts % 10 == 0 {
            scale *= 0.5;
        }
    }
}

fn random_measure(n: usize, rng: &mut StdRng) -> DiscreteMeasure {
    let sites = random_sites(n, rng);
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.gen::<f64>()).collect();
    DiscreteMeasure::new_normalized(sites, raw).unwrap()
}

fn check_partition_of_unity(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 1);
    let domain = ConvexPolygon::unit_square();
    for _ in 0..10 {
        let n = rng.gen_range(2..80);
        let sites = random_sites(n, &mut rng);
        let (_, diag) = random_splus_diagram(&domain, &sites, &mut rng);
        let total: f64 = diag.masses().iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("total mass {total} for n={n}"));
        }
    }
    Ok(())
}

fn check_cell_convexity(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 2);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(40, &mut rng);
    let (_, diag) = random_splus_diagram(&domain, &sites, &mut rng);
    for (ci, cell) in diag.cells().iter().enumerate() {
        let vs = cell.vertices();
        for i in 0..vs.len() {
            let a = vs[i];
            let b = vs[(i + 1) % vs.len()];
            let c = vs[(i + 2) % vs.len()];
            if (b - a).cross(c - b) < -TOL_GEO {
                return Err(format!("cell {ci} has a reflex corner"));
            }
        }
    }
    Ok(())
}

fn check_interface_symmetry(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 3);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(30, &mut rng);
    let (_, diag) = random_splus_diagram(&domain, &sites, &mut rng);
    for (&(i, j), &len) in diag.interfaces() {
        if len < 0.0 {
            return Err(format!("negative interface ({i},{j})"));
        }
        if diag.interface(i, j) != diag.interface(j, i) {
            return Err(format!("asymmetric interface ({i},{j})"));
        }
    }
    Ok(())
}

fn check_constant_shift(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 4);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(15, &mut rng);
    let (psi, diag) = random_splus_diagram(&domain, &sites, &mut rng);
    let shifted = LaguerreDiagram::new(&domain, &sites, &psi.shifted(2.75))
        .map_err(|e| e.to_string())?;
    for i in 0..sites.len() {
        if (diag.masses()[i] - shifted.masses()[i]).abs() > 1e-13 {
            return Err(format!("cell {i} mass changed under constant shift"));
        }
    }
    Ok(())
}

fn check_voronoi_reduction(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 5);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(12, &mut rng);
    let diag = LaguerreDiagram::new(&domain, &sites, &Potential::voronoi(&sites))
        .map_err(|e| e.to_string())?;
    for _ in 0..500 {
        let p = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
        let mut nearest = 0;
        let mut best = f64::INFINITY;
        for (k, y) in sites.points().iter().enumerate() {
            let d = p.dist(*y);
            if d < best {
                best = d;
                nearest = k;
            }
        }
        let margin = sites
            .points()
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != nearest)
            .map(|(_, y)| p.dist(*y) - best)
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-9 {
            continue;
        }
        if !diag.cell(nearest).contains(p, 1e-9) {
            return Err(format!("point {p:?} not in its Voronoi cell"));
        }
    }
    Ok(())
}

fn check_overlay_total(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 6);
    let domain = ConvexPolygon::unit_square();
    let sa = random_sites(10, &mut rng);
    let sb = random_sites(13, &mut rng);
    let (_, da) = random_splus_diagram(&domain, &sa, &mut rng);
    let (_, db) = random_splus_diagram(&domain, &sb, &mut rng);
    let total: f64 = diagram_overlay(&da, &db)
        .map_err(|e| e.to_string())?
        .values()
        .sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("overlay mass {total}"));
    }
    Ok(())
}

fn check_gradient_fd(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 7);
    let domain = ConvexPolygon::unit_square();
    let mu = random_measure(10, &mut rng);
    let (psi, diag) = random_splus_diagram(&domain, mu.sites(), &mut rng);
    let h = 1e-6;
    for j in 0..mu.len() {
        let mut fwd = psi.values().to_vec();
        fwd[j] += h;
        let mut bwd = psi.values().to_vec();
        bwd[j] -= h;
        let kp = kantorovich_value(&domain, &mu, &Potential::new(fwd).unwrap())
            .map_err(|e| e.to_string())?;
        let km = kantorovich_value(&domain, &mu, &Potential::new(bwd).unwrap())
            .map_err(|e| e.to_string())?;
        let fd = (kp - km) / (2.0 * h);
        let expected = mu.weights()[j] - diag.masses()[j];
        if (fd - expected).abs() > 1e-5 {
            return Err(format!("coordinate {j}: fd {fd} vs {expected}"));
        }
    }
    Ok(())
}

fn check_jacobian_fd(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 8);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(10, &mut rng);
    let (psi, diag) = random_splus_diagram(&domain, &sites, &mut rng);
    let jac = mass_jacobian(&diag).map_err(|e| e.to_string())?.to_dense();
    let n = sites.len();
    let h = 1e-6;
    for j in 0..n {
        let mut fwd = psi.values().to_vec();
        fwd[j] += h;
        let mut bwd = psi.values().to_vec();
        bwd[j] -= h;
        let gp = LaguerreDiagram::new(&domain, &sites, &Potential::new(fwd).unwrap()).unwrap();
        let gm = LaguerreDiagram::new(&domain, &sites, &Potential::new(bwd).unwrap()).unwrap();
        for i in 0..n {
            let fd = (gp.masses()[i] - gm.masses()[i]) / (2.0 * h);
            if (jac[i * n + j] - fd).abs() > 1e-4 {
                return Err(format!("entry ({i},{j}): {} vs fd {fd}", jac[i * n + j]));
            }
        }
    }
    Ok(())
}

fn check_objective_shift(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 9);
    let domain = ConvexPolygon::unit_square();
    let mu = random_measure(8, &mut rng);
    let (psi, _) = random_splus_diagram(&domain, mu.sites(), &mut rng);
    let k0 = kantorovich_value(&domain, &mu, &psi).map_err(|e| e.to_string())?;
    let k1 = kantorovich_value(&domain, &mu, &psi.shifted(-3.5)).map_err(|e| e.to_string())?;
    if (k0 - k1).abs() > 1e-12 {
        return Err(format!("K changed under shift: {k0} vs {k1}"));
    }
    Ok(())
}

fn check_monotone_damping(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 10);
    let domain = ConvexPolygon::unit_square();
    let mu = random_measure(25, &mut rng);
    let report = solve_semidiscrete(&domain, &mu, &SolveConfig::default())
        .map_err(|e| e.to_string())?;
    for w in report.residual_history.windows(2) {
        if w[1] >= w[0] {
            return Err(format!("residual went {} -> {}", w[0], w[1]));
        }
    }
    if report.final_residual > 1e-9 {
        return Err(format!("final residual {}", report.final_residual));
    }
    Ok(())
}

fn check_hessian_kernel(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 11);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(9, &mut rng);
    let (_, diag) = random_splus_diagram(&domain, &sites, &mut rng);
    if !diag.interface_graph_connected() {
        return Err("interface graph disconnected".into());
    }
    let jac = mass_jacobian(&diag).map_err(|e| e.to_string())?;
    let ones = vec![1.0; sites.len()];
    for v in jac.apply(&ones) {
        if v.abs() > 1e-12 {
            return Err(format!("DG·1 component {v}"));
        }
    }
    Ok(())
}

fn check_brunn_minkowski(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 12);
    let domain = ConvexPolygon::unit_square();
    let sites = random_sites(12, &mut rng);
    let (psi0, d0) = random_splus_diagram(&domain, &sites, &mut rng);
    let (psi1, d1) = random_splus_diagram(&domain, &sites, &mut rng);
    for step in 1..10 {
        let t = step as f64 / 10.0;
        let values: Vec<f64> = psi0
            .values()
            .iter()
            .zip(psi1.values())
            .map(|(&a, &b)| (1.0 - t) * a + t * b)
            .collect();
        let dt = LaguerreDiagram::new(&domain, &sites, &Potential::new(values).unwrap()).unwrap();
        for i in 0..sites.len() {
            let lhs = dt.masses()[i].sqrt();
            let rhs = (1.0 - t) * d0.masses()[i].sqrt() + t * d1.masses()[i].sqrt();
            if lhs < rhs - 1e-8 {
                return Err(format!("cell {i} at t={t}: {lhs} < {rhs}"));
            }
        }
    }
    Ok(())
}

fn check_poincare(seed: u64) -> Result<(), String> {
    let domain = ConvexPolygon::unit_square();
    let mut ratios = Vec::new();
    for (k, &n) in [10usize, 30, 60].iter().enumerate() {
        let mut rng = rng_for(seed, 13 + k as u64);
        let sites = random_sites(n, &mut rng);
        let (_, diag) = random_splus_diagram(&domain, &sites, &mut rng);
        let jac = mass_jacobian(&diag).map_err(|e| e.to_string())?;
        // PSD structure under arbitrary vectors.
        for _ in 0..20 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let g = diag.masses();
            let mean: f64 = v.iter().zip(g).map(|(&x, &w)| x * w).sum();
            let second: f64 = v.iter().zip(g).map(|(&x, &w)| x * x * w).sum();
            let variance = second - mean * mean;
            let dirichlet = -jac.quad_form(&v);
            if variance < -1e-12 {
                return Err(format!("negative variance {variance}"));
            }
            if dirichlet < -1e-10 {
                return Err(format!("negative Dirichlet energy {dirichlet}"));
            }
        }
        // Fitted constant from smooth test vectors, stable in n.
        let pts = sites.points();
        let smooth: Vec<Vec<f64>> = vec![
            pts.iter().map(|p| p.x).collect(),
            pts.iter().map(|p| p.y).collect(),
            pts.iter().map(|p| p.x + p.y).collect(),
            pts.iter().map(|p| p.x * p.y).collect(),
        ];
        let mut worst: f64 = 0.0;
        for v in &smooth {
            let g = diag.masses();
            let mean: f64 = v.iter().zip(g).map(|(&x, &w)| x * w).sum();
            let second: f64 = v.iter().zip(g).map(|(&x, &w)| x * x * w).sum();
            let variance = second - mean * mean;
            let dirichlet = -jac.quad_form(v);
            if dirichlet > 1e-12 {
                worst = worst.max(variance / dirichlet);
            }
        }
        if !worst.is_finite() {
            return Err("ratio overflowed".into());
        }
        ratios.push(worst);
    }
    let max = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if max / min > 30.0 {
        return Err(format!("ratio unstable across sizes: {ratios:?}"));
    }
    Ok(())
}

fn check_reverse_lipschitz(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 16);
    let domain = ConvexPolygon::unit_square();
    let config = SolveConfig::default();
    for _ in 0..3 {
        let mu = random_measure(12, &mut rng);
        let nu = random_measure(9, &mut rng);
        let (w2, _) = wasserstein_exact(&mu, &nu, 2).map_err(|e| e.to_string())?;
        let ta = monge_map(&domain, &mu, &config).map_err(|e| e.to_string())?;
        let tb = monge_map(&domain, &nu, &config).map_err(|e| e.to_string())?;
        let d = exact_l2_distance(&ta, &tb).map_err(|e| e.to_string())?;
        if w2 > d + 1e-6 {
            return Err(format!("W2 {w2} above map distance {d}"));
        }
    }
    Ok(())
}

fn check_injectivity(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 17);
    let domain = ConvexPolygon::unit_square();
    let config = SolveConfig::default();
    let mu = random_measure(10, &mut rng);
    let a = monge_map(&domain, &mu, &config).map_err(|e| e.to_string())?;
    let b = monge_map(&domain, &mu, &config).map_err(|e| e.to_string())?;
    let d = exact_l2_distance(&a, &b).map_err(|e| e.to_string())?;
    if d > 1e-6 {
        return Err(format!("same measure maps differ by {d}"));
    }
    if tv_distance(&mu, &mu) != 0.0 {
        return Err("TV of a measure with itself is nonzero".into());
    }
    Ok(())
}

fn check_projection_contraction(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 18);
    let domain = ConvexPolygon::unit_square();
    let config = SolveConfig::default();
    let a = monge_map(&domain, &random_measure(10, &mut rng), &config)
        .map_err(|e| e.to_string())?;
    let b = monge_map(&domain, &random_measure(12, &mut rng), &config)
        .map_err(|e| e.to_string())?;
    let exact = exact_l2_distance(&a, &b).map_err(|e| e.to_string())?;
    for m in [8, 32] {
        let va = vectorize(&a, m).map_err(|e| e.to_string())?;
        let vb = vectorize(&b, m).map_err(|e| e.to_string())?;
        let d = vector_distance(&va, &vb).map_err(|e| e.to_string())?;
        if d > exact + 1e-8 {
            return Err(format!("m={m}: projected {d} exceeds exact {exact}"));
        }
    }
    Ok(())
}

fn check_refinement_monotonicity(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 19);
    let domain = ConvexPolygon::unit_square();
    let config = SolveConfig::default();
    let a = monge_map(&domain, &random_measure(8, &mut rng), &config)
        .map_err(|e| e.to_string())?;
    let b = monge_map(&domain, &random_measure(11, &mut rng), &config)
        .map_err(|e| e.to_string())?;
    let mut prev = 0.0;
    for m in [4, 8, 16, 32] {
        let va = vectorize(&a, m).map_err(|e| e.to_string())?;
        let vb = vectorize(&b, m).map_err(|e| e.to_string())?;
        let d = vector_distance(&va, &vb).map_err(|e| e.to_string())?;
        if d < prev - 1e-12 {
            return Err(format!("m={m}: {d} below coarser {prev}"));
        }
        prev = d;
    }
    Ok(())
}

fn check_dual_potential_bounds(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 20);
    let domain = ConvexPolygon::unit_square();
    let m_x = domain.max_norm();
    let mu = random_measure(15, &mut rng);
    let report =
        solve_semidiscrete(&domain, &mu, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let psi = &report.potential;
    let pts = mu.points();
    for i in 0..mu.len() {
        for j in (i + 1)..mu.len() {
            if (psi[i] - psi[j]).abs() > m_x * pts[i].dist(pts[j]) + 1e-9 {
                return Err(format!("Lipschitz bound fails at ({i},{j})"));
            }
        }
        if psi[i].abs() > m_x * mu.sites().diameter() + 1e-9 {
            return Err(format!("sup bound fails at {i}"));
        }
    }
    Ok(())
}

fn check_metric_axioms(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 21);
    let a = random_measure(8, &mut rng);
    let b = random_measure(9, &mut rng);
    let c = random_measure(7, &mut rng);
    for p in [1, 2] {
        let (dab, _) = wasserstein_exact(&a, &b, p).map_err(|e| e.to_string())?;
        let (dba, _) = wasserstein_exact(&b, &a, p).map_err(|e| e.to_string())?;
        let (dbc, _) = wasserstein_exact(&b, &c, p).map_err(|e| e.to_string())?;
        let (dac, _) = wasserstein_exact(&a, &c, p).map_err(|e| e.to_string())?;
        if (dab - dba).abs() > 1e-8 {
            return Err(format!("asymmetry at p={p}"));
        }
        if dac > dab + dbc + 1e-8 {
            return Err(format!("triangle inequality fails at p={p}"));
        }
    }
    Ok(())
}

fn check_wasserstein_ordering(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 22);
    let a = random_measure(10, &mut rng);
    let b = random_measure(10, &mut rng);
    let (w1, _) = wasserstein_exact(&a, &b, 1).map_err(|e| e.to_string())?;
    let (w2, _) = wasserstein_exact(&a, &b, 2).map_err(|e| e.to_string())?;
    let diam = std::f64::consts::SQRT_2;
    if w1 > w2 + 1e-9 {
        return Err(format!("W1 {w1} > W2 {w2}"));
    }
    if w2 > diam.sqrt() * w1.sqrt() + 1e-9 {
        return Err(format!("W2 {w2} above bi-Hölder bound"));
    }
    Ok(())
}

fn check_w1_duality(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 23);
    let a = random_measure(10, &mut rng);
    let b = random_measure(8, &mut rng);
    let (w1, _) = wasserstein_exact(&a, &b, 1).map_err(|e| e.to_string())?;
    for _ in 0..32 {
        let anchor = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let mut integral = 0.0;
        for (p, &w) in a.points().iter().zip(a.weights()) {
            integral += sign * p.dist(anchor) * w;
        }
        for (p, &w) in b.points().iter().zip(b.weights()) {
            integral -= sign * p.dist(anchor) * w;
        }
        if w1 < integral - 1e-9 {
            return Err(format!("dual value {integral} above W1 {w1}"));
        }
    }
    Ok(())
}

fn check_sinkhorn_bias(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 24);
    let a = random_measure(10, &mut rng);
    let b = random_measure(10, &mut rng);
    let (exact, _) = wasserstein_exact(&a, &b, 2).map_err(|e| e.to_string())?;
    let mut prev = f64::INFINITY;
    for epsilon in [8e-3, 4e-3, 2e-3] {
        let v = sinkhorn(&a, &b, epsilon, 100_000, 1e-6).map_err(|e| e.to_string())?;
        let err = (v - exact).abs();
        if err > prev + 1e-6 {
            return Err(format!("bias grew from {prev} to {err} at ε={epsilon}"));
        }
        prev = err;
    }
    Ok(())
}

fn check_determinism(seed: u64) -> Result<(), String> {
    let spec = FamilySpec::new(FamilyKind::Gaussian, seed);
    let cfg = ScatterConfig {
        clouds: 3,
        n_points: 12,
        m: 8,
        ..ScatterConfig::default()
    };
    let a = distance_scatter(&spec, &cfg, seed).map_err(|e| e.to_string())?;
    let b = distance_scatter(&spec, &cfg, seed).map_err(|e| e.to_string())?;
    if a.to_csv() != b.to_csv() {
        return Err("two runs with the same seed differ".into());
    }
    Ok(())
}

fn check_scatter_flags(seed: u64) -> Result<(), String> {
    let spec = FamilySpec::new(FamilyKind::Mixture4, seed);
    let cfg = ScatterConfig {
        clouds: 5,
        n_points: 25,
        m: 16,
        ..ScatterConfig::default()
    };
    let record = distance_scatter(&spec, &cfg, seed).map_err(|e| e.to_string())?;
    if record
        .column("reverse_lipschitz_ok")
        .iter()
        .any(|&f| f != 1.0)
    {
        return Err("a pair violates reverse-Lipschitz".into());
    }
    Ok(())
}

fn check_sampling_trend(seed: u64) -> Result<(), String> {
    let record = sampling_curve(
        &SamplingTarget::Prescribed(PrescribedMap::Square),
        &[25, 50, 100, 200],
        4,
        16,
        seed,
        &SolveConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let summary = super::suites::summarize_sampling(&record);
    let rho = spearman(&summary.column("n"), &summary.column("mean"));
    if rho >= 0.0 {
        return Err(format!("Spearman correlation {rho} not negative"));
    }
    Ok(())
}

fn check_exponent_windows(seed: u64) -> Result<(), String> {
    // Antipodal-Dirac family: exponent in [0.4, 0.6].
    let thetas: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let record = super::suites::onehalf_experiment(64, &thetas, &SolveConfig::default())
        .map_err(|e| e.to_string())?;
    let pairs: Vec<(f64, f64)> = record
        .column("w2")
        .into_iter()
        .zip(record.column("map_distance"))
        .collect();
    let slope = crate::metrics::holder_fit(&pairs)
        .map_err(|e| e.to_string())?
        .slope;
    if !(0.4..=0.6).contains(&slope) {
        return Err(format!("rate-family exponent {slope} outside [0.4, 0.6]"));
    }
    // Interpolation families: potential stability vs TV and W1.
    let outcome = super::suites::stability_suite(&[12], 1, 10, seed, &SolveConfig::default())
        .map_err(|e| e.to_string())?;
    for s in &outcome.tv_exponents {
        if *s < 0.98 {
            return Err(format!("TV stability exponent {s} below 0.98"));
        }
    }
    for s in &outcome.w1_exponents {
        if *s < 2.0 / 3.0 - 0.05 {
            return Err(format!("W1 stability exponent {s} below 2/3 − 0.05"));
        }
    }
    // Scatter consistency window. Sampling each parameter set twice packs
    // the pair list with near-floor distances as well as full-range ones,
    // so the fit always has its decade of x-range; the exact overlay
    // distance keeps grid-projection loss out of the slope.
    let domain = ConvexPolygon::unit_square();
    let config = SolveConfig::default();
    let mut clouds = Vec::new();
    for p in 0..6u64 {
        let spec = FamilySpec::new(FamilyKind::Gaussian, derive_seed(seed, 0xE1, p));
        for rep in 0..2u64 {
            clouds.push(super::sample_family(
                &spec,
                150,
                derive_seed(seed, 0xE2, p * 2 + rep),
            ));
        }
    }
    let maps: Vec<_> = clouds
        .iter()
        .map(|mu| monge_map(&domain, mu, &config))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut pairs = Vec::new();
    for i in 0..clouds.len() {
        for j in (i + 1)..clouds.len() {
            let (w2, _) = wasserstein_exact(&clouds[i], &clouds[j], 2)
                .map_err(|e| e.to_string())?;
            let d = exact_l2_distance(&maps[i], &maps[j]).map_err(|e| e.to_string())?;
            pairs.push((w2, d));
        }
    }
    let slope = crate::metrics::holder_fit(&pairs)
        .map_err(|e| e.to_string())?
        .slope;
    if !(2.0 / 15.0..=1.0).contains(&slope) {
        return Err(format!("scatter exponent {slope} outside [2/15, 1]"));
    }
    Ok(())
}

fn check_embedding_roundtrip(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 25);
    let m = 6;
    let values: Vec<Point2> = (0..m * m)
        .map(|_| Point2::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>()))
        .collect();
    let v = crate::embedding::VectorizedEmbedding::new(m, values);
    let back = embedding_from_bytes(&embedding_to_bytes(&v)).map_err(|e| e.to_string())?;
    for (a, b) in v.values().iter().zip(back.values()) {
        if a.x.to_bits() != b.x.to_bits() || a.y.to_bits() != b.y.to_bits() {
            return Err("round trip is not bit-exact".into());
        }
    }
    Ok(())
}

fn check_pointcloud_roundtrip(seed: u64) -> Result<(), String> {
    let mut rng = rng_for(seed, 26);
    let mu = random_measure(20, &mut rng);
    let back = parse_point_cloud(&point_cloud_to_csv(&mu)).map_err(|e| e.to_string())?;
    if back.len() != mu.len() {
        return Err("atom count changed".into());
    }
    for i in 0..mu.len() {
        if mu.points()[i].dist(back.points()[i]) > 1e-12
            || (mu.weights()[i] - back.weights()[i]).abs() > 1e-12
        {
            return Err(format!("atom {i} drifted"));
        }
    }
    Ok(())
}
