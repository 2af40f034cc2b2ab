//! Semi-discrete dual objective, its derivatives, and a damped Newton solver
//! matching prescribed cell masses.
//!
//! For a potential `ψ` the dual objective is
//! `K(ψ) = Σ_i ∫_{V_i(ψ)} (⟨x, y_i⟩ − ψ_i) dρ(x) + Σ_i μ_i ψ_i`,
//! a convex function whose gradient is `μ − G(ψ)` where `G_i(ψ)` is the
//! ρ-mass of the i-th Laguerre cell. The optimal potential is characterized
//! by `G(ψ) = μ`.

use thiserror::Error;

use crate::geometry::{ConvexPolygon, GeometryError, LaguerreDiagram, Potential};
use crate::measure::{DiscreteMeasure, MeasureError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("cell {index} has zero mass: potential is outside S+")]
    NotInSPlus { index: usize },
    #[error("Voronoi initialization produced an empty cell for site {index}")]
    InitializationFailed { index: usize },
    #[error("no convergence after {iterations} Newton iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("reduced Newton system is numerically singular")]
    LinearSolveFailed,
}

/// Solver knobs; the defaults match the experiment suites.
#[derive(Clone, Copy, Debug)]
pub struct SolveConfig {
    /// Target on `‖G(ψ) − μ‖₁`.
    pub tol_residual: f64,
    pub max_newton_iters: usize,
    pub max_damping_halvings: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_residual: 1e-9,
            max_newton_iters: 100,
            max_damping_halvings: 40,
        }
    }
}

/// Outcome of a damped Newton solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Optimal potential, normalized so that `⟨ψ, G(ψ)⟩ = 0`.
    pub potential: Potential,
    /// Number of accepted Newton steps.
    pub iterations: usize,
    /// `‖G(ψ) − μ‖₁` at the initial point and after each accepted step;
    /// strictly decreasing after the first entry.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
}

/// Jacobian `DG(ψ)` of the cell masses, stored sparsely.
///
/// Off-diagonal entries are `m_ij / (‖y_j − y_i‖ · area(X))`; the density
/// factor keeps `DG` consistent with the ρ-masses on non-unit domains.
/// Rows sum to zero, and `−DG` is positive semidefinite with the constants
/// in its kernel whenever the interface graph is connected.
#[derive(Clone, Debug)]
pub struct MassJacobian {
    n: usize,
    diag: Vec<f64>,
    /// `(i, j, ∂G_i/∂ψ_j)` with `i < j`.
    off: Vec<(usize, usize, f64)>,
}

impl MassJacobian {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> &[(usize, usize, f64)] {
        &self.off
    }

    /// Dense `DG` matrix, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = self.diag[i];
        }
        for &(i, j, v) in &self.off {
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
        a
    }

    /// Matrix-vector product `DG · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .diag
            .iter()
            .zip(v)
            .map(|(&d, &x)| d * x)
            .collect();
        for &(i, j, w) in &self.off {
            out[i] += w * v[j];
            out[j] += w * v[i];
        }
        out
    }

    /// Quadratic form `⟨DG v, v⟩`, written as the negative weighted Dirichlet
    /// energy `−Σ_{i<j} w_ij (v_i − v_j)²` so it is exactly ≤ 0.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(i, j, w) in &self.off {
            let d = v[i] - v[j];
            acc -= w * d * d;
        }
        acc
    }

    /// Dense reduced system `A = (−DG)` with the last row and column removed
    /// (the Newton step pins `δ_N = 0` to factor out the constant kernel).
    fn reduced_neg_dense(&self) -> Vec<f64> {
        let n = self.n - 1;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = -self.diag[i];
        }
        for &(i, j, v) in &self.off {
            if i < n && j < n {
                a[i * n + j] = -v;
                a[j * n + i] = -v;
            }
        }
        a
    }
}

/// `DG(ψ)` from a diagram; requires every cell mass to be positive.
pub fn mass_jacobian(diagram: &LaguerreDiagram) -> Result<MassJacobian, SolveError> {
    if let Some(index) = diagram.masses().iter().position(|&g| g <= 0.0) {
        return Err(SolveError::NotInSPlus { index });
    }
    let n = diagram.len();
    let density = diagram.density();
    let sites = diagram.sites().points();
    let mut diag = vec![0.0; n];
    let mut off = Vec::with_capacity(diagram.interfaces().len());
    for (&(i, j), &len) in diagram.interfaces() {
        if len <= 0.0 {
            continue;
        }
        let w = len * density / sites[i].dist(sites[j]);
        off.push((i, j, w));
        diag[i] -= w;
        diag[j] -= w;
    }
    Ok(MassJacobian { n, diag, off })
}

/// Dual objective `K(ψ)`.
pub fn kantorovich_value(
    domain: &ConvexPolygon,
    measure: &DiscreteMeasure,
    psi: &Potential,
) -> Result<f64, SolveError> {
    let diagram = LaguerreDiagram::new(domain, measure.sites(), psi)?;
    let mut k = 0.0;
    for i in 0..diagram.len() {
        let moment = diagram.first_moments()[i];
        let y = measure.points()[i];
        k += moment.dot(y) - psi[i] * diagram.masses()[i] + measure.weights()[i] * psi[i];
    }
    Ok(k)
}

/// Mass residual `G(ψ) − μ`; its entries sum to zero up to tolerance.
pub fn mass_residual(
    domain: &ConvexPolygon,
    measure: &DiscreteMeasure,
    psi: &Potential,
) -> Result<Vec<f64>, SolveError> {
    let diagram = LaguerreDiagram::new(domain, measure.sites(), psi)?;
    Ok(residual_from(&diagram, measure))
}

fn residual_from(diagram: &LaguerreDiagram, measure: &DiscreteMeasure) -> Vec<f64> {
    diagram
        .masses()
        .iter()
        .zip(measure.weights())
        .map(|(&g, &w)| g - w)
        .collect()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Shifts every entry by `−⟨ψ, G(ψ)⟩`; the cells are unchanged and the
/// result satisfies the zero-mean normalization against the cell masses.
pub fn normalize_potential(psi: &Potential, diagram: &LaguerreDiagram) -> Potential {
    let c: f64 = psi
        .values()
        .iter()
        .zip(diagram.masses())
        .map(|(&p, &g)| p * g)
        .sum();
    psi.shifted(-c)
}

/// Damped Newton iteration for `G(ψ) = μ`, started from the Voronoi
/// potential `ψ_i = ½‖y_i‖²`.
///
/// Each step solves `−DG(ψ) δ = G(ψ) − μ` on the subspace orthogonal to
/// constants (pinning the last coordinate) and backtracks `τ ∈ {1, ½, …}`
/// until the iterate keeps all masses above
/// `ε₀ = ½·min(min_i G_i(ψ⁰), min_i μ_i)` and strictly decreases the
/// residual.
pub fn solve_semidiscrete(
    domain: &ConvexPolygon,
    measure: &DiscreteMeasure,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    let mut psi = Potential::voronoi(measure.sites());
    let mut diagram = LaguerreDiagram::new(domain, measure.sites(), &psi)?;
    if let Some(index) = diagram.masses().iter().position(|&g| g <= 0.0) {
        return Err(SolveError::InitializationFailed { index });
    }
    let eps0 = 0.5 * diagram.min_mass().min(measure.min_weight());

    let mut residual = residual_from(&diagram, measure);
    let mut err = l1(&residual);
    let mut history = vec![err];
    let mut iterations = 0;

    while err > config.tol_residual {
        if iterations >= config.max_newton_iters {
            return Err(SolveError::NoConvergence {
                iterations,
                residual: err,
            });
        }
        let jac = mass_jacobian(&diagram)?;
        let delta = newton_direction(&jac, &residual)?;

        let mut tau = 1.0;
        let mut halvings = 0;
        let accepted = loop {
            let candidate = Potential::new(
                psi.values()
                    .iter()
                    .zip(&delta)
                    .map(|(&p, &d)| p + tau * d)
                    .collect(),
            )
            .map_err(SolveError::Geometry)?;
            let cand_diagram = LaguerreDiagram::new(domain, measure.sites(), &candidate)?;
            let cand_residual = residual_from(&cand_diagram, measure);
            let cand_err = l1(&cand_residual);
            if cand_diagram.min_mass() >= eps0 && cand_err < err {
                break (candidate, cand_diagram, cand_residual, cand_err);
            }
            halvings += 1;
            if halvings > config.max_damping_halvings {
                return Err(SolveError::NoConvergence {
                    iterations,
                    residual: err,
                });
            }
            tau *= 0.5;
        };
        psi = accepted.0;
        diagram = accepted.1;
        residual = accepted.2;
        err = accepted.3;
        history.push(err);
        iterations += 1;
    }

    let normalized = normalize_potential(&psi, &diagram);
    Ok(SolveReport {
        potential: normalized,
        iterations,
        residual_history: history,
        final_residual: err,
    })
}

/// Solves `−DG δ = r` with `δ` pinned to zero in its last coordinate.
fn newton_direction(jac: &MassJacobian, residual: &[f64]) -> Result<Vec<f64>, SolveError> {
    let n = jac.len();
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let mut a = jac.reduced_neg_dense();
    let mut rhs: Vec<f64> = residual[..n - 1].to_vec();
    cholesky_solve_in_place(&mut a, &mut rhs, n - 1)?;
    rhs.push(0.0);
    Ok(rhs)
}

/// Dense Cholesky solve of an SPD system; fails when a pivot collapses,
/// which happens exactly when the interface graph is disconnected.
fn cholesky_solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), SolveError> {
    let scale = (0..n).fold(0.0f64, |m, i| m.max(a[i * n + i].abs())).max(1.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let l = a[j * n + k];
            d -= l * l;
        }
        if d <= 1e-14 * scale {
            return Err(SolveError::LinearSolveFailed);
        }
        let root = d.sqrt();
        a[j * n + j] = root;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / root;
        }
    }
    // Forward substitution L z = b.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // Back substitution Lᵀ x = z.
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, SiteSet};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn split_sites() -> SiteSet {
        SiteSet::new(vec![Point2::new(0.25, 0.5), Point2::new(0.75, 0.5)]).unwrap()
    }

    fn random_measure(n: usize, rng: &mut StdRng) -> DiscreteMeasure {
        loop {
            let pts: Vec<Point2> = (0..n)
                .map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            if let Ok(sites) = SiteSet::new(pts) {
                let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.gen::<f64>()).collect();
                return DiscreteMeasure::new_normalized(sites, raw).unwrap();
            }
        }
    }

    /// Voronoi potential plus a perturbation small enough to stay in S+;
    /// the scale halves on repeated failures so sampling always terminates.
    fn random_potential_in_splus(
        domain: &ConvexPolygon,
        sites: &SiteSet,
        scale: f64,
        rng: &mut StdRng,
    ) -> (Potential, LaguerreDiagram) {
        let mut scale = scale;
        let mut attempts = 0;
        loop {
            let base = Potential::voronoi(sites);
            let values: Vec<f64> = base
                .values()
                .iter()
                .map(|v| v + scale * (rng.gen::<f64>() - 0.5))
                .collect();
            let psi = Potential::new(values).unwrap();
            let diag = LaguerreDiagram::new(domain, sites, &psi).unwrap();
            if diag.min_mass() > 1e-6 {
                return (psi, diag);
            }
            attempts += 1;
            if attempts % 10 == 0 {
                scale *= 0.5;
            }
        }
    }

    #[test]
    fn kantorovich_single_site_telescopes() {
        // With one site the ψ terms cancel and K = ∫⟨x,y⟩dρ = ⟨(½,½), y⟩.
        let domain = ConvexPolygon::unit_square();
        let y = Point2::new(0.3, 0.9);
        let mu = DiscreteMeasure::dirac(y).unwrap();
        for psi0 in [-2.0, 0.0, 5.5] {
            let k = kantorovich_value(&domain, &mu, &Potential::new(vec![psi0]).unwrap()).unwrap();
            assert!(close(k, 0.5 * (y.x + y.y), 1e-12));
        }
    }

    #[test]
    fn kantorovich_constant_shift_invariance() {
        let mut rng = StdRng::seed_from_u64(21);
        let domain = ConvexPolygon::unit_square();
        let mu = random_measure(7, &mut rng);
        let (psi, _) = random_potential_in_splus(&domain, mu.sites(), 0.05, &mut rng);
        let k0 = kantorovich_value(&domain, &mu, &psi).unwrap();
        let k1 = kantorovich_value(&domain, &mu, &psi.shifted(1.7)).unwrap();
        assert!(close(k0, k1, 1e-12));
    }

    #[test]
    fn kantorovich_matches_monte_carlo_max_form() {
        // Oracle: K(ψ) = ∫ max_i(⟨x,y_i⟩ − ψ_i) dρ + Σ μ_i ψ_i by quadrature.
        let domain = ConvexPolygon::unit_square();
        let sites = split_sites();
        let mu = DiscreteMeasure::uniform(sites.clone());
        let psi = Potential::zeros(2);
        let k = kantorovich_value(&domain, &mu, &psi).unwrap();

        let mut rng = StdRng::seed_from_u64(1234);
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let x = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
            let best = sites
                .points()
                .iter()
                .zip(psi.values())
                .map(|(&y, &p)| x.dot(y) - p)
                .fold(f64::NEG_INFINITY, f64::max);
            acc += best;
        }
        let oracle = acc / samples as f64;
        assert!(close(k, oracle, 1e-3), "K {k} vs Monte-Carlo {oracle}");
    }

    #[test]
    fn residual_single_site_is_exactly_zero() {
        let domain = ConvexPolygon::unit_square();
        let mu = DiscreteMeasure::dirac(Point2::new(0.4, 0.2)).unwrap();
        let r = mass_residual(&domain, &mu, &Potential::zeros(1)).unwrap();
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn residual_symmetric_voronoi_split() {
        let domain = ConvexPolygon::unit_square();
        let sites = split_sites();
        let mu = DiscreteMeasure::uniform(sites.clone());
        let r = mass_residual(&domain, &mu, &Potential::voronoi(&sites)).unwrap();
        assert!(close(r[0], 0.0, 1e-12) && close(r[1], 0.0, 1e-12));
    }

    #[test]
    fn residual_sums_to_zero() {
        let mut rng = StdRng::seed_from_u64(33);
        let domain = ConvexPolygon::unit_square();
        let mu = random_measure(15, &mut rng);
        let (psi, _) = random_potential_in_splus(&domain, mu.sites(), 0.1, &mut rng);
        let r = mass_residual(&domain, &mu, &psi).unwrap();
        assert!(r.iter().sum::<f64>().abs() <= 1e-10);
    }

    #[test]
    fn jacobian_two_site_bisector() {
        let domain = ConvexPolygon::unit_square();
        let sites = split_sites();
        let diag =
            LaguerreDiagram::new(&domain, &sites, &Potential::voronoi(&sites)).unwrap();
        let jac = mass_jacobian(&diag).unwrap();
        // Interface length 1, site distance 0.5, unit density.
        assert_eq!(jac.off_diagonal().len(), 1);
        let (i, j, w) = jac.off_diagonal()[0];
        assert_eq!((i, j), (0, 1));
        assert!(close(w, 2.0, 1e-10));
        assert!(close(jac.diagonal()[0], -2.0, 1e-10));
        assert!(close(jac.diagonal()[1], -2.0, 1e-10));
    }

    #[test]
    fn jacobian_single_site_is_zero() {
        let domain = ConvexPolygon::unit_square();
        let sites = SiteSet::new(vec![Point2::new(0.4, 0.4)]).unwrap();
        let diag = LaguerreDiagram::new(&domain, &sites, &Potential::zeros(1)).unwrap();
        let jac = mass_jacobian(&diag).unwrap();
        assert_eq!(jac.len(), 1);
        assert_eq!(jac.diagonal(), &[0.0]);
        assert!(jac.off_diagonal().is_empty());
    }

    #[test]
    fn jacobian_requires_splus() {
        let domain = ConvexPolygon::unit_square();
        // A huge potential on site 1 empties its cell.
        let sites = split_sites();
        let psi = Potential::new(vec![0.0, 10.0]).unwrap();
        let diag = LaguerreDiagram::new(&domain, &sites, &psi).unwrap();
        assert_eq!(diag.masses()[1], 0.0);
        assert!(matches!(
            mass_jacobian(&diag),
            Err(SolveError::NotInSPlus { index: 1 })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(8);
        let domain = ConvexPolygon::unit_square();
        let mu = random_measure(10, &mut rng);
        let (psi, diag) = random_potential_in_splus(&domain, mu.sites(), 0.05, &mut rng);
        let jac = mass_jacobian(&diag).unwrap().to_dense();
        let n = mu.len();
        let h = 1e-6;
        for j in 0..n {
            let mut fwd = psi.values().to_vec();
            fwd[j] += h;
            let mut bwd = psi.values().to_vec();
            bwd[j] -= h;
            let gp = LaguerreDiagram::new(&domain, mu.sites(), &Potential::new(fwd).unwrap())
                .unwrap();
            let gm = LaguerreDiagram::new(&domain, mu.sites(), &Potential::new(bwd).unwrap())
                .unwrap();
            for i in 0..n {
                let fd = (gp.masses()[i] - gm.masses()[i]) / (2.0 * h);
                assert!(
                    close(jac[i * n + j], fd, 1e-4),
                    "entry ({i},{j}): {} vs fd {fd}",
                    jac[i * n + j]
                );
            }
        }
    }

    #[test]
    fn jacobian_density_factor_on_non_unit_domain() {
        // On a domain of area ≠ 1 the Jacobian entries carry the density
        // 1/area(X); finite differences of the ρ-masses pin the factor.
        let mut rng = StdRng::seed_from_u64(61);
        let disc = crate::geometry::regular_polygon_disc(64);
        let pts: Vec<Point2> = (0..8)
            .map(|_| Point2::new(1.4 * rng.gen::<f64>() - 0.7, 1.4 * rng.gen::<f64>() - 0.7))
            .collect();
        let sites = SiteSet::new(pts).unwrap();
        let psi = Potential::voronoi(&sites);
        let diag = LaguerreDiagram::new(&disc, &sites, &psi).unwrap();
        assert!(diag.min_mass() > 0.0);
        let jac = mass_jacobian(&diag).unwrap().to_dense();
        let n = sites.len();
        let h = 1e-6;
        for j in 0..n {
            let mut fwd = psi.values().to_vec();
            fwd[j] += h;
            let mut bwd = psi.values().to_vec();
            bwd[j] -= h;
            let gp =
                LaguerreDiagram::new(&disc, &sites, &Potential::new(fwd).unwrap()).unwrap();
            let gm =
                LaguerreDiagram::new(&disc, &sites, &Potential::new(bwd).unwrap()).unwrap();
            for i in 0..n {
                let fd = (gp.masses()[i] - gm.masses()[i]) / (2.0 * h);
                assert!(
                    close(jac[i * n + j], fd, 1e-4),
                    "disc entry ({i},{j}): {} vs fd {fd}",
                    jac[i * n + j]
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // ∇K(ψ) = μ − G(ψ), checked against central differences of K.
        let mut rng = StdRng::seed_from_u64(77);
        let domain = ConvexPolygon::unit_square();
        let mu = random_measure(10, &mut rng);
        let (psi, diag) = random_potential_in_splus(&domain, mu.sites(), 0.05, &mut rng);
        let h = 1e-6;
        for j in 0..mu.len() {
            let mut fwd = psi.values().to_vec();
            fwd[j] += h;
            let mut bwd = psi.values().to_vec();
            bwd[j] -= h;
            let kp = kantorovich_value(&domain, &mu, &Potential::new(fwd).unwrap()).unwrap();
            let km = kantorovich_value(&domain, &mu, &Potential::new(bwd).unwrap()).unwrap();
            let fd = (kp - km) / (2.0 * h);
            let expected = mu.weights()[j] - diag.masses()[j];
            assert!(
                close(fd, expected, 1e-5),
                "coordinate {j}: fd {fd} vs μ−G {expected}"
            );
        }
    }

    #[test]
    fn solve_single_dirac() {
        let domain = ConvexPolygon::unit_square();
        let y = Point2::new(0.3, 0.6);
        let mu = DiscreteMeasure::dirac(y).unwrap();
        let report = solve_semidiscrete(&domain, &mu, &SolveConfig::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(close(report.potential[0], 0.0, 1e-12));
        assert_eq!(report.final_residual, 0.0);
    }

    #[test]
    fn solve_symmetric_pair() {
        let domain = ConvexPolygon::unit_square();
        let sites = split_sites();
        let mu = DiscreteMeasure::uniform(sites);
        let report = solve_semidiscrete(&domain, &mu, &SolveConfig::default()).unwrap();
        assert!(report.final_residual <= 1e-9);
        // The optimal boundary is the perpendicular bisector, reached when
        // ψ₂ − ψ₁ = (‖y₂‖² − ‖y₁‖²)/2 = 0.25; zero-mean leaves (−0.125, 0.125).
        assert!(close(report.potential[1] - report.potential[0], 0.25, 1e-8));
        assert!(close(report.potential[0], -0.125, 1e-8));
    }

    #[test]
    fn solve_asymmetric_pair_places_boundary() {
        let domain = ConvexPolygon::unit_square();
        let sites = split_sites();
        let mu = DiscreteMeasure::new(sites, vec![0.25, 0.75]).unwrap();
        let report = solve_semidiscrete(&domain, &mu, &SolveConfig::default()).unwrap();
        assert!(report.final_residual <= 1e-9);
        // Boundary ⟨y₂−y₁, x⟩ = ψ₂−ψ₁ means x = 2(ψ₂−ψ₁) = 0.25.
        let split = 2.0 * (report.potential[1] - report.potential[0]);
        assert!(close(split, 0.25, 1e-8));
        let diag = LaguerreDiagram::new(
            &domain,
            &DiscreteMeasure::uniform(split_sites()).sites().clone(),
            &report.potential,
        )
        .unwrap();
        assert!(close(diag.masses()[0], 0.25, 1e-9));
        assert!(close(diag.masses()[1], 0.75, 1e-9));
    }

    #[test]
    fn solve_random_instances_converge() {
        let mut rng = StdRng::seed_from_u64(2024);
        let domain = ConvexPolygon::unit_square();
        for _ in 0..5 {
            let n = rng.gen_range(5..40);
            let mu = random_measure(n, &mut rng);
            let report = solve_semidiscrete(&domain, &mu, &SolveConfig::default()).unwrap();
            assert!(report.final_residual <= 1e-9);
            // Monotone damping: strictly decreasing residual history.
            for w in report.residual_history.windows(2) {
                assert!(w[1] < w[0]);
            }
            // Normalization holds against the final diagram.
            let diag =
                LaguerreDiagram::new(&domain, mu.sites(), &report.potential).unwrap();
            let dot: f64 = report
                .potential
                .values()
                .iter()
                .zip(diag.masses())
                .map(|(&p, &g)| p * g)
                .sum();
            assert!(dot.abs() <= 1e-9);
            assert!(diag.min_mass() > 0.0);
        }
    }

    #[test]
    fn normalize_potential_examples() {
        let domain = ConvexPolygon::unit_square();
        let sites = split_sites();
        // ψ = (0, 0.125) puts the boundary at x = 0.25: masses (0.25, 0.75).
        let psi = Potential::new(vec![0.0, 0.125]).unwrap();
        let diag = LaguerreDiagram::new(&domain, &sites, &psi).unwrap();
        assert!(close(diag.masses()[0], 0.25, 1e-12));

        // Same cells, already normalized: unchanged.
        let psi_n = normalize_potential(&psi, &diag);
        let again = normalize_potential(&psi_n, &diag);
        for i in 0..2 {
            assert!(close(psi_n[i], again[i], 1e-15));
        }

        // Arithmetic case from the masses (0.25, 0.75): ψ = (1, 3) shifts
        // by ⟨ψ, G⟩ = 2.5.
        let shifted = normalize_potential(&Potential::new(vec![1.0, 3.0]).unwrap(), &diag);
        assert!(close(shifted[0], -1.5, 1e-12));
        assert!(close(shifted[1], 0.5, 1e-12));

        // Constant potential with matching measure normalizes to zero.
        let constant = normalize_potential(&Potential::new(vec![2.0, 2.0]).unwrap(), &diag);
        assert!(close(constant[0], -2.0 + 2.0 * diag.masses().iter().sum::<f64>(), 1e-9));
    }

    #[test]
    fn hessian_kernel_is_constants_on_connected_instances() {
        let mut rng = StdRng::seed_from_u64(55);
        let domain = ConvexPolygon::unit_square();
        let mu = random_measure(8, &mut rng);
        let (_, diag) = random_potential_in_splus(&domain, mu.sites(), 0.05, &mut rng);
        assert!(diag.interface_graph_connected());
        let jac = mass_jacobian(&diag).unwrap();
        // Constants are in the kernel: DG·𝟙 = 0.
        let ones = vec![1.0; mu.len()];
        for v in jac.apply(&ones) {
            assert!(v.abs() <= 1e-12);
        }
        // The reduced system is SPD (Cholesky succeeds), so the kernel is
        // exactly one-dimensional.
        assert!(newton_direction(&jac, &vec![0.1; mu.len()]).is_ok());
    }

    #[test]
    fn brunn_minkowski_interpolation() {
        let mut rng = StdRng::seed_from_u64(99);
        let domain = ConvexPolygon::unit_square();
        for _ in 0..10 {
            let mu = random_measure(12, &mut rng);
            let (psi0, d0) = random_potential_in_splus(&domain, mu.sites(), 0.08, &mut rng);
            let (psi1, d1) = random_potential_in_splus(&domain, mu.sites(), 0.08, &mut rng);
            let g0 = d0.masses();
            let g1 = d1.masses();
            let dist01 = l1(&g1
                .iter()
                .zip(g0)
                .map(|(&a, &b)| a - b)
                .collect::<Vec<_>>());
            for step in 1..10 {
                let t = step as f64 / 10.0;
                let values: Vec<f64> = psi0
                    .values()
                    .iter()
                    .zip(psi1.values())
                    .map(|(&a, &b)| (1.0 - t) * a + t * b)
                    .collect();
                let dt = LaguerreDiagram::new(
                    &domain,
                    mu.sites(),
                    &Potential::new(values).unwrap(),
                )
                .unwrap();
                let gt = dt.masses();
                for i in 0..mu.len() {
                    let lhs = gt[i].sqrt();
                    let rhs = (1.0 - t) * g0[i].sqrt() + t * g1[i].sqrt();
                    assert!(lhs >= rhs - 1e-8, "cell {i} at t={t}: {lhs} < {rhs}");
                }
                let dist0t = l1(&gt
                    .iter()
                    .zip(g0)
                    .map(|(&a, &b)| a - b)
                    .collect::<Vec<_>>());
                assert!(dist0t <= dist01 + 1e-8);
                assert!(dist0t <= 2.0 * (1.0 - (1.0 - t) * (1.0 - t)) + 1e-8);
            }
        }
    }

    #[test]
    fn poincare_structure() {
        let mut rng = StdRng::seed_from_u64(4242);
        let domain = ConvexPolygon::unit_square();
        for &n in &[5usize, 20] {
            let mu = random_measure(n, &mut rng);
            let (_, diag) = random_potential_in_splus(&domain, mu.sites(), 0.05, &mut rng);
            let jac = mass_jacobian(&diag).unwrap();
            for _ in 0..20 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                let g = diag.masses();
                let mean: f64 = v.iter().zip(g).map(|(&x, &w)| x * w).sum();
                let second: f64 = v.iter().zip(g).map(|(&x, &w)| x * x * w).sum();
                let variance = second - mean * mean;
                let dirichlet = -jac.quad_form(&v);
                assert!(variance >= -1e-12);
                assert!(dirichlet >= -1e-10);
                if dirichlet > 1e-12 {
                    assert!((variance / dirichlet).is_finite());
                }
            }
        }
    }
}
