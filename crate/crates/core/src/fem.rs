//! Lagrange P1 (triangles) / Q1 (quads) finite elements on `Γ`.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lift::Lift;
use crate::mesh::SurfaceMesh;
use crate::quadrature::QuadRule;
use crate::vec3::{self, Vec3};

/// Gauss order (points per direction) used for matrix and load assembly.
pub const ASSEMBLY_ORDER: usize = 4;
/// Gauss order used for error norms and geometric diagnostics.
pub const DIAGNOSTIC_ORDER: usize = 6;

/// Degree-one Lagrange space on a surface mesh. DoF `i` is vertex `i`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<SurfaceMesh>,
}

impl FeSpace {
    pub fn new(mesh: Arc<SurfaceMesh>) -> Self {
        FeSpace { mesh }
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    /// Nodal interpolant of `f` (evaluated at the vertices of `Γ`).
    pub fn interpolate(&self, f: impl Fn(&Vec3) -> f64) -> FeFunction {
        FeFunction {
            space: self.clone(),
            coeffs: self.mesh.vertices().iter().map(f).collect(),
        }
    }

    pub fn function(&self, coeffs: Vec<f64>) -> Result<FeFunction> {
        if coeffs.len() != self.n_dofs() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                self.n_dofs()
            )));
        }
        Ok(FeFunction {
            space: self.clone(),
            coeffs,
        })
    }

    /// Sparsity pattern shared by `M` and `A`: vertices coupled through a cell.
    fn pattern(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.n_dofs();
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for cell in self.mesh.cells() {
            for &i in cell {
                for &j in cell {
                    rows[i].insert(j);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows {
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        (row_ptr, col_idx)
    }

    fn assemble_with<K>(&self, quad_order: usize, kernel: K) -> Result<SparseSpd>
    where
        K: Fn(&Local) -> f64,
    {
        let (row_ptr, col_idx) = self.pattern();
        let mut mat = SparseSpd {
            n: self.n_dofs(),
            values: vec![0.0; col_idx.len()],
            row_ptr,
            col_idx,
        };
        let kind = self.mesh.cell_kind();
        let nn = kind.nodes();
        let rule = QuadRule::for_cell(kind, quad_order.max(1));
        let mut local = [[0.0; 4]; 4];
        for id in 0..self.mesh.n_cells() {
            let em = self.mesh.element_map(id);
            local.iter_mut().for_each(|r| r.fill(0.0));
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let jac = em.jacobian(*xi);
                let ae = vec3::area_element(&jac);
                let phi = em.shape(*xi);
                let ref_grad = em.shape_grad(*xi);
                let mut grad = [[0.0; 3]; 4];
                for a in 0..nn {
                    grad[a] = vec3::tangential_gradient(&jac, ref_grad[a]).ok_or(Error::DegenerateCell {
                        cell: id,
                        area_element: ae,
                    })?;
                }
                if !(ae > 0.0) {
                    return Err(Error::DegenerateCell { cell: id, area_element: ae });
                }
                for a in 0..nn {
                    for b in a..nn {
                        local[a][b] += w * ae * kernel(&Local { phi: &phi, grad: &grad, a, b });
                    }
                }
            }
            let cell = self.mesh.cell(id);
            for a in 0..nn {
                for b in a..nn {
                    let v = local[a][b];
                    *mat.entry_mut(cell[a], cell[b]) += v;
                    if a != b {
                        *mat.entry_mut(cell[b], cell[a]) += v;
                    }
                }
            }
        }
        Ok(mat)
    }

    /// Mass matrix `M_ij = ∫_Γ φ_i φ_j`.
    pub fn assemble_mass(&self, quad_order: usize) -> Result<SparseSpd> {
        self.assemble_with(quad_order, |l| l.phi[l.a] * l.phi[l.b])
    }

    /// Stiffness matrix `A_ij = ∫_Γ ∇_Γφ_i · ∇_Γφ_j`.
    pub fn assemble_stiffness(&self, quad_order: usize) -> Result<SparseSpd> {
        self.assemble_with(quad_order, |l| vec3::dot(&l.grad[l.a], &l.grad[l.b]))
    }

    /// Load `b_i = ∫_Γ (f ∘ P) φ_i σ`.
    ///
    /// `σ · |∂₁F × ∂₂F|` is the area element of the lifted map `P ∘ F_τ`, so
    /// the integrand is evaluated with that area element directly. Cells cut
    /// by a discontinuity of `f` are integrated with the same rule.
    pub fn assemble_load_sigma<F>(&self, lift: &Lift, f: F, quad_order: usize) -> Result<Vec<f64>>
    where
        F: Fn(&Vec3) -> f64,
    {
        let kind = self.mesh.cell_kind();
        let rule = QuadRule::for_cell(kind, quad_order.max(1));
        let mut b = vec![0.0; self.n_dofs()];
        for id in 0..self.mesh.n_cells() {
            let em = self.mesh.element_map(id);
            let cell = self.mesh.cell(id);
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let (p, dphi) = lift.composite_jacobian(&em, *xi)?;
                let lifted_ae = vec3::area_element(&dphi);
                let fp = f(&p);
                let phi = em.shape(*xi);
                for (a, &v) in cell.iter().enumerate() {
                    b[v] += w * lifted_ae * fp * phi[a];
                }
            }
        }
        Ok(b)
    }
}

struct Local<'a> {
    phi: &'a [f64; 4],
    grad: &'a [Vec3; 4],
    a: usize,
    b: usize,
}

/// A symmetric matrix in compressed sparse row layout with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpd {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSpd {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.position(i, j).expect("entry outside the sparsity pattern");
        &mut self.values[k]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// `xᵀ · self · y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn same_pattern(&self, other: &SparseSpd) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// `alpha · self + beta · other` for matrices with identical patterns.
    pub fn linear_combination(&self, alpha: f64, other: &SparseSpd, beta: f64) -> Result<SparseSpd> {
        if !self.same_pattern(other) {
            return Err(Error::invalid("matrices have different sparsity patterns"));
        }
        Ok(SparseSpd {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).all(|k| {
                let j = self.col_idx[k];
                self.position(j, i).map(|kt| self.values[kt]) == Some(self.values[k])
            })
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A finite element function: one coefficient per vertex.
#[derive(Debug, Clone)]
pub struct FeFunction {
    pub space: FeSpace,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    /// Value and tangential gradient (ambient 3-vector) at `ξ` in `cell`.
    pub fn evaluate(&self, cell: usize, xi: [f64; 2]) -> (f64, Vec3) {
        let mesh = self.space.mesh();
        let em = mesh.element_map(cell);
        let ids = mesh.cell(cell);
        let phi = em.shape(xi);
        let dphi = em.shape_grad(xi);
        let mut value = 0.0;
        let mut ref_grad = [0.0; 2];
        for (a, &v) in ids.iter().enumerate() {
            let c = self.coeffs[v];
            value += c * phi[a];
            ref_grad[0] += c * dphi[a][0];
            ref_grad[1] += c * dphi[a][1];
        }
        let grad = vec3::tangential_gradient(&em.jacobian(xi), ref_grad).unwrap_or([0.0; 3]);
        (value, grad)
    }

    /// `∫_Γ U` computed as `1ᵀ M U`.
    pub fn integral(&self, mass: &SparseSpd) -> f64 {
        mass.mul_vec(&self.coeffs).iter().sum()
    }
}
