//! `L²(Γ)` and `H¹(Γ)` errors between lifted exact solutions and FE functions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lift::Lift;
use crate::mesh::SurfaceMesh;
use crate::quadrature::QuadRule;
use crate::sphere::ZonalEvaluator;
use crate::vec3::{self, Vec3};

/// Cells per parallel work item; fixed so the reduction order never changes.
const CHUNK: usize = 64;

/// One or more exact solutions on `γ`, each with its tangential gradient.
pub trait ExactField: Sync {
    fn n_fields(&self) -> usize;
    fn eval(&self, p: &Vec3) -> Vec<(f64, Vec3)>;
}

impl ExactField for ZonalEvaluator {
    fn n_fields(&self) -> usize {
        self.n_powers()
    }

    fn eval(&self, p: &Vec3) -> Vec<(f64, Vec3)> {
        self.value_and_gradient(p)
    }
}

/// A single exact solution given by closures.
pub struct FnField<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> ExactField for FnField<F, G>
where
    F: Fn(&Vec3) -> f64 + Sync,
    G: Fn(&Vec3) -> Vec3 + Sync,
{
    fn n_fields(&self) -> usize {
        1
    }

    fn eval(&self, p: &Vec3) -> Vec<(f64, Vec3)> {
        vec![((self.value)(p), (self.gradient)(p))]
    }
}

/// Squared error contributions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

impl ErrorNorms {
    /// Full `H¹` norm `√(‖e‖²_{L²} + |e|²_{H¹})`.
    pub fn h1(&self) -> f64 {
        (self.l2 * self.l2 + self.h1_semi * self.h1_semi).sqrt()
    }
}

/// Errors `‖Pũ_i − U_i‖` for paired exact fields and coefficient vectors.
///
/// The exact gradient on `Γ` is obtained with the chain rule through
/// `Φ = P ∘ F_τ`: `∂_ξ(ũ ∘ Φ) = DΦᵀ ∇_γ ũ`, then `∇_Γ = DF G⁻¹ ∂_ξ`.
pub fn errors_many(
    mesh: &SurfaceMesh,
    lift: &Lift,
    coeffs: &[&[f64]],
    exact: &dyn ExactField,
    quad_order: usize,
) -> Result<Vec<ErrorNorms>> {
    if quad_order < 4 {
        return Err(Error::invalid(format!("error quadrature order must be at least 4, got {quad_order}")));
    }
    let nf = coeffs.len();
    if exact.n_fields() != nf {
        return Err(Error::invalid("number of exact fields and FE functions differ"));
    }
    if coeffs.iter().any(|c| c.len() != mesh.n_vertices()) {
        return Err(Error::invalid("coefficient vector length does not match the mesh"));
    }
    let rule = QuadRule::for_cell(mesh.cell_kind(), quad_order);
    let n_cells = mesh.n_cells();
    let chunks: Vec<usize> = (0..n_cells).step_by(CHUNK).collect();
    let partial: Vec<Vec<(f64, f64)>> = chunks
        .par_iter()
        .map(|&start| -> Result<Vec<(f64, f64)>> {
            let mut acc = vec![(0.0, 0.0); nf];
            for id in start..(start + CHUNK).min(n_cells) {
                let em = mesh.element_map(id);
                let ids = mesh.cell(id);
                for (xi, w) in rule.points.iter().zip(&rule.weights) {
                    let df = em.jacobian(*xi);
                    let ae = vec3::area_element(&df);
                    let (p, dphi) = lift.composite_jacobian(&em, *xi)?;
                    let phi = em.shape(*xi);
                    let dref = em.shape_grad(*xi);
                    let exact_vals = exact.eval(&p);
                    for (f, (c, (uex, gex))) in coeffs.iter().zip(exact_vals).enumerate() {
                        let mut uh = 0.0;
                        let mut gref = [0.0; 2];
                        for (a, &v) in ids.iter().enumerate() {
                            uh += c[v] * phi[a];
                            gref[0] += c[v] * dref[a][0];
                            gref[1] += c[v] * dref[a][1];
                        }
                        let dxi = [vec3::dot(&dphi[0], &gex), vec3::dot(&dphi[1], &gex)];
                        let diff = [dxi[0] - gref[0], dxi[1] - gref[1]];
                        let gdiff = vec3::tangential_gradient(&df, diff).ok_or(Error::DegenerateCell {
                            cell: id,
                            area_element: ae,
                        })?;
                        acc[f].0 += w * ae * (uex - uh).powi(2);
                        acc[f].1 += w * ae * vec3::dot(&gdiff, &gdiff);
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![(0.0, 0.0); nf];
    for chunk in partial {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.0 += c.0;
            t.1 += c.1;
        }
    }
    Ok(total
        .into_iter()
        .map(|(l2, semi)| ErrorNorms {
            l2: l2.sqrt(),
            h1_semi: semi.sqrt(),
        })
        .collect())
}

/// `‖Pũ − U‖_{L²(Γ)}`.
pub fn l2_error<F>(mesh: &SurfaceMesh, lift: &Lift, coeffs: &[f64], exact: F, quad_order: usize) -> Result<f64>
where
    F: Fn(&Vec3) -> f64 + Sync,
{
    let field = FnField {
        value: exact,
        gradient: |_: &Vec3| [0.0; 3],
    };
    Ok(errors_many(mesh, lift, &[coeffs], &field, quad_order)?[0].l2)
}

/// Full `‖Pũ − U‖_{H¹(Γ)}`; `gradient` is the tangential gradient on `γ`.
pub fn h1_error<F, G>(
    mesh: &SurfaceMesh,
    lift: &Lift,
    coeffs: &[f64],
    exact: F,
    gradient: G,
    quad_order: usize,
) -> Result<f64>
where
    F: Fn(&Vec3) -> f64 + Sync,
    G: Fn(&Vec3) -> Vec3 + Sync,
{
    let field = FnField { value: exact, gradient };
    Ok(errors_many(mesh, lift, &[coeffs], &field, quad_order)?[0].h1())
}

/// Observed rates `-log(e_{i+1}/e_i) / log(n_{i+1}/n_i)` against DoFs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub segments: Vec<f64>,
    pub last: f64,
}

pub fn fit_rates(dofs: &[usize], errors: &[f64]) -> Result<RateFit> {
    if dofs.len() != errors.len() || dofs.len() < 2 {
        return Err(Error::invalid("need at least two (dofs, error) rows"));
    }
    if errors.iter().any(|&e| !(e > 0.0)) || dofs.contains(&0) {
        return Err(Error::invalid("errors and dofs must be positive"));
    }
    if dofs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("dofs must increase strictly"));
    }
    let segments: Vec<f64> = dofs
        .windows(2)
        .zip(errors.windows(2))
        .map(|(d, e)| -(e[1] / e[0]).ln() / (d[1] as f64 / d[0] as f64).ln())
        .collect();
    let last = *segments.last().unwrap();
    Ok(RateFit { segments, last })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&lx, &ly)
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{FeSpace, ASSEMBLY_ORDER};
    use crate::mesh::InitialMesh;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn zeta1(p: &Vec3) -> f64 {
        (3.0 / (4.0 * PI)).sqrt() * p[2]
    }

    fn zeta1_grad(p: &Vec3) -> Vec3 {
        let c = (3.0 / (4.0 * PI)).sqrt();
        [-c * p[2] * p[0], -c * p[2] * p[1], c * (1.0 - p[2] * p[2])]
    }

    #[test]
    fn fit_rates_examples() {
        let d = [10, 100, 1000];
        let fit = fit_rates(&d, &[0.1, 0.01, 0.001]).unwrap();
        assert!(fit.segments.iter().all(|s| (s - 1.0).abs() < 1e-12));
        let fit = fit_rates(&[100, 400], &[1.0, 0.5]).unwrap();
        assert_eq!(fit.segments.len(), 1);
        assert!((fit.last - 0.5).abs() < 1e-12);
        assert!(fit_rates(&[100, 50], &[1.0, 0.5]).is_err());
        assert!(fit_rates(&[100], &[1.0]).is_err());
    }

    #[test]
    fn trivial_errors_vanish() {
        let lift = Lift::unit_sphere();
        let mesh = SurfaceMesh::sphere_at_level(InitialMesh::CubeQuads, 2, &lift).unwrap();
        let zero = vec![0.0; mesh.n_vertices()];
        assert_eq!(l2_error(&mesh, &lift, &zero, |_| 0.0, 6).unwrap(), 0.0);
        let c = vec![1.7; mesh.n_vertices()];
        assert!(l2_error(&mesh, &lift, &c, |_| 1.7, 6).unwrap() < 1e-14);
        assert!(h1_error(&mesh, &lift, &c, |_| 1.7, |_| [0.0; 3], 6).unwrap() < 1e-13);
        assert!(l2_error(&mesh, &lift, &c, |_| 1.7, 2).is_err());
    }

    #[test]
    fn interpolation_errors_have_optimal_order() {
        for kind in [InitialMesh::CubeQuads, InitialMesh::IcosahedronTriangles] {
            let lift = Lift::unit_sphere();
            let mut l2 = vec![];
            let mut h1 = vec![];
            for level in 2..=5 {
                let mesh = Arc::new(SurfaceMesh::sphere_at_level(kind, level, &lift).unwrap());
                let u = FeSpace::new(mesh.clone()).interpolate(zeta1);
                l2.push(l2_error(&mesh, &lift, &u.coeffs, zeta1, 6).unwrap());
                h1.push(h1_error(&mesh, &lift, &u.coeffs, zeta1, zeta1_grad, 6).unwrap());
            }
            for w in l2.windows(2) {
                let r = w[0] / w[1];
                assert!((3.5..=4.5).contains(&r), "{kind:?} L2 ratio {r}");
            }
            for w in h1.windows(2) {
                let r = w[0] / w[1];
                assert!((1.8..=2.2).contains(&r), "{kind:?} H1 ratio {r}");
            }
            assert!(h1.iter().zip(&l2).all(|(a, b)| a >= b));
        }
    }

    #[test]
    fn identity_lift_matches_direct_quadrature_on_flat_surface() {
        // a closed flat "pillow": two copies of the unit square with opposite orientation.
        // With the plane as the exact surface, Φ = F_τ and the H¹ error is the planar one.
        use crate::lift::{DistanceFunction, Mat3};
        use crate::mesh::CellKind;
        struct Plane;
        impl DistanceFunction for Plane {
            fn distance(&self, x: &Vec3) -> f64 {
                x[2]
            }
            fn gradient(&self, _: &Vec3) -> Vec3 {
                [0.0, 0.0, 1.0]
            }
            fn hessian(&self, _: &Vec3) -> Mat3 {
                [[0.0; 3]; 3]
            }
        }
        let mesh = SurfaceMesh::new(
            CellKind::Quad,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 2, 3, 0, 3, 2, 1],
        )
        .unwrap();
        let lift = Lift::SignedDistance(Arc::new(Plane));
        let exact = |p: &Vec3| (p[0] * 2.0).sin() * p[1];
        let grad = |p: &Vec3| [2.0 * (p[0] * 2.0).cos() * p[1], (p[0] * 2.0).sin(), 0.0];
        let coeffs = [0.3, -0.2, 0.5, 0.1];
        let err = h1_error(&mesh, &lift, &coeffs, exact, grad, 8).unwrap();
        // oracle: direct tensor Gauss on the square of (u - u_h)² + |∇(u - u_h)|², doubled
        let (x, w) = crate::quadrature::gauss_legendre_unit(12);
        let mut total = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                let (a, b) = (x[i], x[j]);
                let uh = coeffs[0] * (1.0 - a) * (1.0 - b) + coeffs[1] * a * (1.0 - b) + coeffs[2] * a * b + coeffs[3] * (1.0 - a) * b;
                let gx = -coeffs[0] * (1.0 - b) + coeffs[1] * (1.0 - b) + coeffs[2] * b - coeffs[3] * b;
                let gy = -coeffs[0] * (1.0 - a) - coeffs[1] * a + coeffs[2] * a + coeffs[3] * (1.0 - a);
                let p = [a, b, 0.0];
                let g = grad(&p);
                total += w[i] * w[j] * ((exact(&p) - uh).powi(2) + (g[0] - gx).powi(2) + (g[1] - gy).powi(2));
            }
        }
        let oracle = (2.0 * total).sqrt();
        // order-8 vs order-12 Gauss on an analytic integrand
        assert!((err - oracle).abs() < 1e-10, "{err} vs {oracle}");
    }

    #[test]
    fn triangle_inequality_and_quadrature_stability() {
        let lift = Lift::unit_sphere();
        let mesh = Arc::new(SurfaceMesh::sphere_at_level(InitialMesh::IcosahedronTriangles, 3, &lift).unwrap());
        let space = FeSpace::new(mesh.clone());
        let m = space.assemble_mass(ASSEMBLY_ORDER).unwrap();
        let u = space.interpolate(|p| zeta1(p) + 0.01 * p[0]);
        let v = space.interpolate(|p| zeta1(p) - 0.02 * p[1] * p[1]);
        let eu = l2_error(&mesh, &lift, &u.coeffs, zeta1, 6).unwrap();
        let ev = l2_error(&mesh, &lift, &v.coeffs, zeta1, 6).unwrap();
        let diff: Vec<f64> = u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a - b).collect();
        let dist = m.inner(&diff, &diff).sqrt();
        assert!(eu <= ev + dist + 1e-12);
        let e8 = l2_error(&mesh, &lift, &u.coeffs, zeta1, 8).unwrap();
        assert!(((e8 - eu) / eu).abs() < 5e-3);
    }
}
