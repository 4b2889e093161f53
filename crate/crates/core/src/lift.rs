//! Lifts `P: Γ → γ` from the discrete surface onto the exact one.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ElementMap, SurfaceMesh};
use crate::quadrature::QuadRule;
use crate::vec3::{self, Jac, Vec3};

pub type Mat3 = [[f64; 3]; 3];

/// A surface given by its signed distance function `d` near `γ`.
///
/// Implementors supply `d`, `∇d` and `∇²d`; the orthogonal projection
/// `P(x) = x − d(x)∇d(x)` and its differential are derived from them unless
/// overridden.
pub trait DistanceFunction: Send + Sync {
    fn distance(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
    fn hessian(&self, x: &Vec3) -> Mat3;

    /// Whether `x` lies in the tubular neighbourhood where `P` is defined.
    fn in_domain(&self, x: &Vec3) -> bool {
        x.iter().all(|c| c.is_finite())
    }

    fn project(&self, x: &Vec3) -> Vec3 {
        let d = self.distance(x);
        vec3::sub(x, &vec3::scale(&self.gradient(x), d))
    }

    /// `dP = I − ∇d ∇dᵀ − d ∇²d`.
    fn projection_jacobian(&self, x: &Vec3) -> Mat3 {
        let d = self.distance(x);
        let g = self.gradient(x);
        let h = self.hessian(x);
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                m[i][j] = id - g[i] * g[j] - d * h[i][j];
            }
        }
        m
    }

    /// Outward unit normal of `γ` at a point of `γ`.
    fn normal(&self, p: &Vec3) -> Vec3 {
        self.gradient(p)
    }
}

/// The unit sphere, `d(x) = |x| − 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitSphere;

impl DistanceFunction for UnitSphere {
    fn distance(&self, x: &Vec3) -> f64 {
        vec3::norm(x) - 1.0
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        vec3::scale(x, 1.0 / vec3::norm(x))
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        let r = vec3::norm(x);
        let n = vec3::scale(x, 1.0 / r);
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                m[i][j] = (id - n[i] * n[j]) / r;
            }
        }
        m
    }

    fn in_domain(&self, x: &Vec3) -> bool {
        vec3::norm(x) > 0.0 && x.iter().all(|c| c.is_finite())
    }

    fn project(&self, x: &Vec3) -> Vec3 {
        vec3::scale(x, 1.0 / vec3::norm(x))
    }

    /// `(I − x̂x̂ᵀ)/|x|`.
    fn projection_jacobian(&self, x: &Vec3) -> Mat3 {
        self.hessian(x)
    }
}

/// Selects a lift in configuration files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftKind {
    /// Orthogonal projection along the signed distance gradient.
    Sdf,
    /// Piecewise lift over the six coordinate patches of the unit sphere.
    Generic,
}

impl LiftKind {
    pub fn build(self) -> Lift {
        match self {
            LiftKind::Sdf => Lift::unit_sphere(),
            LiftKind::Generic => Lift::GenericSixPatch,
        }
    }
}

#[derive(Clone)]
pub enum Lift {
    SignedDistance(Arc<dyn DistanceFunction>),
    /// The unit-sphere lift that keeps the two coordinates off the dominant
    /// axis and solves the dominant one from `|z| = 1`.
    GenericSixPatch,
}

impl fmt::Debug for Lift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lift::SignedDistance(_) => f.write_str("SignedDistance"),
            Lift::GenericSixPatch => f.write_str("GenericSixPatch"),
        }
    }
}

/// Patch `(axis, sign)` of the six-patch lift containing `x`.
///
/// `x` is in patch `(i, +)` when `x_i ≥ |x_j|` for `j ≠ i`, and in `(i, −)`
/// when `x_i ≤ −|x_j|`. Ties go to the smallest axis, `+` first.
pub fn six_patch_of(x: &Vec3) -> (usize, f64) {
    for i in 0..3 {
        let others = (0..3).filter(|&j| j != i);
        if others.clone().all(|j| x[i] >= x[j].abs()) {
            return (i, 1.0);
        }
        if others.clone().all(|j| x[i] <= -x[j].abs()) {
            return (i, -1.0);
        }
    }
    unreachable!("the six patches cover R^3")
}

/// Lift of `x` with the formula of patch `(axis, sign)`.
pub fn six_patch_formula(x: &Vec3, axis: usize, sign: f64) -> Result<Vec3> {
    let rest: f64 = (0..3).filter(|&k| k != axis).map(|k| x[k] * x[k]).sum();
    let radicand = 1.0 - rest;
    if !(radicand >= 0.0) {
        return Err(Error::LiftDomain {
            point: *x,
            reason: format!("off-axis coordinates have norm > 1 in patch {axis}"),
        });
    }
    let mut z = *x;
    z[axis] = sign * radicand.sqrt();
    Ok(z)
}

impl Lift {
    pub fn unit_sphere() -> Self {
        Lift::SignedDistance(Arc::new(UnitSphere))
    }

    pub fn kind(&self) -> LiftKind {
        match self {
            Lift::SignedDistance(_) => LiftKind::Sdf,
            Lift::GenericSixPatch => LiftKind::Generic,
        }
    }

    pub fn lift_point(&self, x: &Vec3) -> Result<Vec3> {
        match self {
            Lift::SignedDistance(d) => {
                if !d.in_domain(x) {
                    return Err(Error::LiftDomain {
                        point: *x,
                        reason: "outside the tubular neighbourhood".into(),
                    });
                }
                Ok(d.project(x))
            }
            Lift::GenericSixPatch => {
                let (axis, sign) = six_patch_of(x);
                six_patch_formula(x, axis, sign)
            }
        }
    }

    /// Differential `dP(x)` as a row-major 3×3 matrix.
    pub fn jacobian(&self, x: &Vec3) -> Result<Mat3> {
        match self {
            Lift::SignedDistance(d) => {
                if !d.in_domain(x) {
                    return Err(Error::LiftDomain {
                        point: *x,
                        reason: "outside the tubular neighbourhood".into(),
                    });
                }
                Ok(d.projection_jacobian(x))
            }
            Lift::GenericSixPatch => {
                let (axis, sign) = six_patch_of(x);
                let z = six_patch_formula(x, axis, sign)?;
                if z[axis] == 0.0 {
                    return Err(Error::LiftDomain {
                        point: *x,
                        reason: "patch lift is not differentiable on the patch rim".into(),
                    });
                }
                let mut m = [[0.0; 3]; 3];
                for (j, row) in m.iter_mut().enumerate() {
                    if j != axis {
                        row[j] = 1.0;
                    } else {
                        for k in (0..3).filter(|&k| k != axis) {
                            row[k] = -x[k] / z[axis];
                        }
                    }
                }
                Ok(m)
            }
        }
    }

    /// Outward normal of `γ` at a point of `γ`.
    pub fn surface_normal(&self, p: &Vec3) -> Vec3 {
        match self {
            Lift::SignedDistance(d) => d.normal(p),
            Lift::GenericSixPatch => vec3::scale(p, 1.0 / vec3::norm(p)),
        }
    }

    /// Lifted point `Φ(ξ) = P(F_τ(ξ))` and `DΦ = dP · DF_τ`.
    pub fn composite_jacobian(&self, em: &ElementMap, xi: [f64; 2]) -> Result<(Vec3, Jac)> {
        let x = em.eval(xi);
        let p = self.lift_point(&x)?;
        let dp = self.jacobian(&x)?;
        let df = em.jacobian(xi);
        Ok((p, [vec3::mat_vec(&dp, &df[0]), vec3::mat_vec(&dp, &df[1])]))
    }

    /// Area ratio `σ = |∂₁Φ × ∂₂Φ| / |∂₁F × ∂₂F|` at `ξ`.
    pub fn sigma_at(&self, em: &ElementMap, xi: [f64; 2]) -> Result<f64> {
        let (_, dphi) = self.composite_jacobian(em, xi)?;
        let lifted = vec3::area_element(&dphi);
        let flat = vec3::area_element(&em.jacobian(xi));
        if !(flat > 0.0) || !(lifted > 0.0) {
            return Err(Error::DegenerateCell {
                cell: em.cell,
                area_element: flat.min(lifted),
            });
        }
        Ok(lifted / flat)
    }

    /// `σ` at every Gauss point of every cell.
    pub fn sigma_field(&self, mesh: &SurfaceMesh, quad_order: usize) -> Result<SigmaField> {
        let rule = QuadRule::for_cell(mesh.cell_kind(), quad_order.max(1));
        let mut values = Vec::with_capacity(mesh.n_cells() * rule.len());
        for id in 0..mesh.n_cells() {
            let em = mesh.element_map(id);
            for xi in &rule.points {
                values.push(self.sigma_at(&em, *xi)?);
            }
        }
        Ok(SigmaField {
            points_per_cell: rule.len(),
            values,
        })
    }

    /// `max |σ − 1|` over the Gauss points of order `quad_order` in every cell.
    pub fn sigma_sup_deviation(&self, mesh: &SurfaceMesh, quad_order: usize) -> Result<f64> {
        Ok(self.sigma_field(mesh, quad_order)?.sup_deviation())
    }

    /// `Pf = f ∘ P`.
    pub fn pullback<'a, F>(&'a self, f: F) -> impl Fn(&Vec3) -> Result<f64> + 'a
    where
        F: Fn(&Vec3) -> f64 + 'a,
    {
        move |x| self.lift_point(x).map(|p| f(&p))
    }
}

/// Per-cell, per-Gauss-point samples of `σ`.
#[derive(Debug, Clone)]
pub struct SigmaField {
    pub points_per_cell: usize,
    pub values: Vec<f64>,
}

impl SigmaField {
    pub fn cell(&self, id: usize) -> &[f64] {
        &self.values[id * self.points_per_cell..(id + 1) * self.points_per_cell]
    }

    pub fn sup_deviation(&self) -> f64 {
        self.values.iter().fold(0.0, |m, s| m.max((s - 1.0).abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
