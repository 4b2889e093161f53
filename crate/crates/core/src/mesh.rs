//! Closed surface meshes made of flat triangles or bilinear quadrilaterals.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::Lift;
use crate::quadrature::QuadRule;
use crate::vec3::{self, Jac, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Triangle,
    Quad,
}

impl CellKind {
    pub fn nodes(self) -> usize {
        match self {
            CellKind::Triangle => 3,
            CellKind::Quad => 4,
        }
    }
}

/// Coarse sphere meshes that seed the refinement sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialMesh {
    /// Six quads: the cube surface with its corners projected onto the sphere.
    #[serde(alias = "cube")]
    CubeQuads,
    /// Twenty triangles of the regular icosahedron.
    #[serde(alias = "ico")]
    IcosahedronTriangles,
}

/// A closed surface mesh `Γ`.
///
/// Cells are stored in a flat connectivity array with `cell_kind.nodes()`
/// entries per cell, ordered counterclockwise with respect to the outward
/// normal. Quad nodes are ordered `(0,0), (1,0), (1,1), (0,1)` in reference
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    cell_kind: CellKind,
    vertices: Vec<Vec3>,
    cells: Vec<usize>,
    level: usize,
}

impl SurfaceMesh {
    pub fn new(cell_kind: CellKind, vertices: Vec<Vec3>, cells: Vec<usize>) -> Result<Self> {
        let mesh = SurfaceMesh {
            cell_kind,
            vertices,
            cells,
            level: 0,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn sphere(kind: InitialMesh) -> Self {
        match kind {
            InitialMesh::CubeQuads => cube_sphere(),
            InitialMesh::IcosahedronTriangles => icosahedron(),
        }
    }

    /// Builds `kind` and refines it `level` times with `lift` placing new vertices.
    pub fn sphere_at_level(kind: InitialMesh, level: usize, lift: &Lift) -> Result<Self> {
        let mut mesh = Self::sphere(kind);
        for _ in 0..level {
            mesh = mesh.refine_uniform(lift)?;
        }
        Ok(mesh)
    }

    pub fn cell_kind(&self) -> CellKind {
        self.cell_kind
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.cell_kind.nodes()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cell(&self, id: usize) -> &[usize] {
        let n = self.cell_kind.nodes();
        &self.cells[id * n..(id + 1) * n]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks_exact(self.cell_kind.nodes())
    }

    /// Map the vertex set through `f` (used for rigid motions and scalings).
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        SurfaceMesh {
            cell_kind: self.cell_kind,
            vertices: self.vertices.iter().map(f).collect(),
            cells: self.cells.clone(),
            level: self.level,
        }
    }

    /// Undirected edges `(a, b)` with `a < b`, in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for cell in self.cells() {
            for (a, b) in cell_edges(cell) {
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.edges().len() as i64 + self.n_cells() as i64
    }

    /// Checks the structural invariants of a closed, consistently oriented mesh.
    pub fn validate(&self) -> Result<()> {
        let n = self.cell_kind.nodes();
        if !self.cells.len().is_multiple_of(n) || self.cells.is_empty() {
            return Err(Error::invalid("connectivity length is not a multiple of the cell size"));
        }
        if let Some(&bad) = self.cells.iter().find(|&&v| v >= self.vertices.len()) {
            return Err(Error::invalid(format!("cell references missing vertex {bad}")));
        }
        // each directed edge appears once, its reverse exactly once
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for cell in self.cells() {
            for (a, b) in cell_edges(cell) {
                if a == b {
                    return Err(Error::invalid("cell with repeated vertex"));
                }
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 || directed.get(&(b, a)) != Some(&1) {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) is not shared by exactly two consistently oriented cells"
                )));
            }
        }
        for id in 0..self.n_cells() {
            let em = self.element_map(id);
            for xi in em.sample_points() {
                let ae = vec3::area_element(&em.jacobian(xi));
                if !(ae > 1e-14 * em.diameter().powi(2)) {
                    return Err(Error::DegenerateCell { cell: id, area_element: ae });
                }
            }
        }
        Ok(())
    }

    pub fn element_map(&self, cell: usize) -> ElementMap {
        let ids = self.cell(cell);
        let mut nodes = [[0.0; 3]; 4];
        for (slot, &v) in nodes.iter_mut().zip(ids) {
            *slot = self.vertices[v];
        }
        ElementMap {
            cell,
            kind: self.cell_kind,
            nodes,
        }
    }

    /// Splits every cell into four children.
    ///
    /// Edge midpoints (and, for quads, the bilinear cell centre) are lifted
    /// onto the exact surface with `lift`. Old vertices keep their indices;
    /// new vertices are numbered in order of first appearance.
    pub fn refine_uniform(&self, lift: &Lift) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_vertex = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> Result<usize> {
            let key = (a.min(b), a.max(b));
            if let Some(&id) = midpoint.get(&key) {
                return Ok(id);
            }
            let m = vec3::scale(&vec3::add(&vertices[a], &vertices[b]), 0.5);
            let p = lift.lift_point(&m)?;
            vertices.push(p);
            midpoint.insert(key, vertices.len() - 1);
            Ok(vertices.len() - 1)
        };
        let mut cells = Vec::with_capacity(self.cells.len() * 4);
        match self.cell_kind {
            CellKind::Triangle => {
                for c in self.cells() {
                    let (v0, v1, v2) = (c[0], c[1], c[2]);
                    let m01 = new_vertex(v0, v1, &mut vertices)?;
                    let m12 = new_vertex(v1, v2, &mut vertices)?;
                    let m20 = new_vertex(v2, v0, &mut vertices)?;
                    cells.extend_from_slice(&[v0, m01, m20]);
                    cells.extend_from_slice(&[m01, v1, m12]);
                    cells.extend_from_slice(&[m20, m12, v2]);
                    cells.extend_from_slice(&[m01, m12, m20]);
                }
            }
            CellKind::Quad => {
                for c in self.cells() {
                    let (v0, v1, v2, v3) = (c[0], c[1], c[2], c[3]);
                    let m01 = new_vertex(v0, v1, &mut vertices)?;
                    let m12 = new_vertex(v1, v2, &mut vertices)?;
                    let m23 = new_vertex(v2, v3, &mut vertices)?;
                    let m30 = new_vertex(v3, v0, &mut vertices)?;
                    let mut centre = [0.0; 3];
                    for &v in c {
                        centre = vec3::add(&centre, &vec3::scale(&vertices[v], 0.25));
                    }
                    vertices.push(lift.lift_point(&centre)?);
                    let mc = vertices.len() - 1;
                    cells.extend_from_slice(&[v0, m01, mc, m30]);
                    cells.extend_from_slice(&[m01, v1, m12, mc]);
                    cells.extend_from_slice(&[mc, m12, v2, m23]);
                    cells.extend_from_slice(&[m30, mc, m23, v3]);
                }
            }
        }
        Ok(SurfaceMesh {
            cell_kind: self.cell_kind,
            vertices,
            cells,
            level: self.level + 1,
        })
    }

    /// Total area of `Γ`, integrated through the element maps.
    pub fn area(&self) -> f64 {
        let rule = QuadRule::for_cell(self.cell_kind, 6);
        (0..self.n_cells())
            .map(|id| {
                let em = self.element_map(id);
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(xi, w)| w * vec3::area_element(&em.jacobian(*xi)))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Maximum number of cells sharing a vertex.
    pub fn max_valence(&self) -> usize {
        let mut count = vec![0usize; self.n_vertices()];
        for &v in &self.cells {
            count[v] += 1;
        }
        count.into_iter().max().unwrap_or(0)
    }

    pub fn quality(&self) -> MeshQuality {
        let mut h_max: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        let mut c_j: f64 = 1.0;
        for id in 0..self.n_cells() {
            let em = self.element_map(id);
            let h = em.diameter();
            h_max = h_max.max(h);
            h_min = h_min.min(h);
            for xi in em.sample_points() {
                // scaled by the cell size so the bound is refinement invariant
                let (lo, hi) = vec3::singular_values(&em.jacobian(xi));
                c_j = c_j.max(hi / h).max(h / lo);
            }
        }
        MeshQuality {
            h: h_max,
            c_q: h_max / h_min,
            c_j,
            c_v: self.max_valence(),
        }
    }
}

fn cell_edges(cell: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = cell.len();
    (0..n).map(move |i| (cell[i], cell[(i + 1) % n]))
}

/// Mesh-quality constants: `h` (max cell diameter), the quasi-uniformity
/// ratio `c_q = h / min diameter`, the Jacobian bound `c_J` of the element
/// maps scaled by their cell diameter, and the maximum vertex valence `c_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshQuality {
    pub h: f64,
    pub c_q: f64,
    pub c_j: f64,
    pub c_v: usize,
}

/// The (bi)linear map `F_τ` from the reference cell onto one cell of `Γ`.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub cell: usize,
    pub kind: CellKind,
    pub nodes: [Vec3; 4],
}

impl ElementMap {
    /// Reference shape functions at `xi`; only the first `kind.nodes()` are meaningful.
    pub fn shape(&self, xi: [f64; 2]) -> [f64; 4] {
        let [x, y] = xi;
        match self.kind {
            CellKind::Triangle => [1.0 - x - y, x, y, 0.0],
            CellKind::Quad => [
                (1.0 - x) * (1.0 - y),
                x * (1.0 - y),
                x * y,
                (1.0 - x) * y,
            ],
        }
    }

    /// Reference gradients of the shape functions.
    pub fn shape_grad(&self, xi: [f64; 2]) -> [[f64; 2]; 4] {
        let [x, y] = xi;
        match self.kind {
            CellKind::Triangle => [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
            CellKind::Quad => [
                [-(1.0 - y), -(1.0 - x)],
                [1.0 - y, -x],
                [y, x],
                [-y, 1.0 - x],
            ],
        }
    }

    pub fn eval(&self, xi: [f64; 2]) -> Vec3 {
        let phi = self.shape(xi);
        let mut out = [0.0; 3];
        for (node, w) in self.nodes.iter().zip(phi).take(self.kind.nodes()) {
            out = vec3::add(&out, &vec3::scale(node, w));
        }
        out
    }

    /// `DF_τ(ξ)` as two ambient column vectors.
    pub fn jacobian(&self, xi: [f64; 2]) -> Jac {
        let grads = self.shape_grad(xi);
        let mut j = [[0.0; 3]; 2];
        for (node, g) in self.nodes.iter().zip(grads).take(self.kind.nodes()) {
            for d in 0..3 {
                j[0][d] += node[d] * g[0];
                j[1][d] += node[d] * g[1];
            }
        }
        j
    }

    /// Largest distance between two nodes.
    pub fn diameter(&self) -> f64 {
        let n = self.kind.nodes();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                d = d.max(vec3::dist(&self.nodes[i], &self.nodes[j]));
            }
        }
        d
    }

    /// Reference vertices plus the centre.
    pub fn sample_points(&self) -> Vec<[f64; 2]> {
        match self.kind {
            CellKind::Triangle => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0 / 3.0, 1.0 / 3.0]],
            CellKind::Quad => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        }
    }
}

fn cube_sphere() -> SurfaceMesh {
    let a = 1.0 / 3f64.sqrt();
    // vertex index = bit0 (x>0) + 2·bit1 (y>0) + 4·bit2 (z>0)
    let vertices = (0..8)
        .map(|i| {
            let sign = |bit: usize| if i & bit != 0 { a } else { -a };
            [sign(1), sign(2), sign(4)]
        })
        .collect();
    #[rustfmt::skip]
    let cells = vec![
        0, 4, 6, 2, // -x
        1, 3, 7, 5, // +x
        0, 1, 5, 4, // -y
        2, 6, 7, 3, // +y
        0, 2, 3, 1, // -z
        4, 5, 7, 6, // +z
    ];
    SurfaceMesh {
        cell_kind: CellKind::Quad,
        vertices,
        cells,
        level: 0,
    }
}

fn icosahedron() -> SurfaceMesh {
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let mut vertices: Vec<Vec3> = Vec::with_capacity(12);
    for &s1 in &[-1.0, 1.0] {
        for &s2 in &[-1.0, 1.0] {
            vertices.push([0.0, s1, s2 * phi]);
            vertices.push([s1, s2 * phi, 0.0]);
            vertices.push([s2 * phi, 0.0, s1]);
        }
    }
    let r = (1.0 + phi * phi).sqrt();
    for v in &mut vertices {
        *v = vec3::scale(v, 1.0 / r);
    }
    // faces are the triples of mutually adjacent vertices (edge length 2/r)
    let edge = 2.0 / r;
    let adjacent = |i: usize, j: usize| (vec3::dist(&vertices[i], &vertices[j]) - edge).abs() < 1e-9;
    let mut cells = Vec::with_capacity(60);
    for i in 0..12 {
        for j in (i + 1)..12 {
            if !adjacent(i, j) {
                continue;
            }
            for k in (j + 1)..12 {
                if adjacent(i, k) && adjacent(j, k) {
                    let n = vec3::cross(
                        &vec3::sub(&vertices[j], &vertices[i]),
                        &vec3::sub(&vertices[k], &vertices[i]),
                    );
                    if vec3::dot(&n, &vertices[i]) > 0.0 {
                        cells.extend_from_slice(&[i, j, k]);
                    } else {
                        cells.extend_from_slice(&[i, k, j]);
                    }
                }
            }
        }
    }
    SurfaceMesh {
        cell_kind: CellKind::Triangle,
        vertices,
        cells,
        level: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn radial() -> Lift {
        Lift::unit_sphere()
    }

    #[test]
    fn cube_sphere_combinatorics() {
        let m = SurfaceMesh::sphere(InitialMesh::CubeQuads);
        assert_eq!((m.n_vertices(), m.n_cells(), m.edges().len()), (8, 6, 12));
        assert_eq!(m.euler_characteristic(), 2);
        m.validate().unwrap();
        let a = 1.0 / 3f64.sqrt();
        for v in m.vertices() {
            assert!((vec3::norm(v) - 1.0).abs() < 1e-15);
            assert!(v.iter().all(|c| (c.abs() - a).abs() == 0.0));
        }
        assert_eq!(m.quality().c_v, 3);
    }

    #[test]
    fn icosahedron_combinatorics() {
        let m = SurfaceMesh::sphere(InitialMesh::IcosahedronTriangles);
        assert_eq!((m.n_vertices(), m.n_cells(), m.edges().len()), (12, 20, 30));
        assert_eq!(m.euler_characteristic(), 2);
        m.validate().unwrap();
        let q = m.quality();
        assert!((q.c_q - 1.0).abs() < 1e-12);
        assert_eq!(q.c_v, 5);
    }

    #[test]
    fn refinement_counts() {
        let cube = SurfaceMesh::sphere(InitialMesh::CubeQuads);
        let c1 = cube.refine_uniform(&radial()).unwrap();
        assert_eq!((c1.n_cells(), c1.n_vertices(), c1.level()), (24, 26, 1));
        let ico = SurfaceMesh::sphere(InitialMesh::IcosahedronTriangles);
        let i1 = ico.refine_uniform(&radial()).unwrap();
        assert_eq!((i1.n_cells(), i1.n_vertices()), (80, 42));
        for m in [&c1, &i1] {
            m.validate().unwrap();
            assert_eq!(m.euler_characteristic(), 2);
        }
    }

    #[test]
    fn refinement_halves_h() {
        let lift = radial();
        // the first cube refinement moves face centres far; the ratio settles afterwards
        let m1 = SurfaceMesh::sphere_at_level(InitialMesh::CubeQuads, 1, &lift).unwrap();
        let m2 = m1.refine_uniform(&lift).unwrap();
        let m3 = m2.refine_uniform(&lift).unwrap();
        assert_eq!(m2.n_cells(), 96);
        for (a, b) in [(&m1, &m2), (&m2, &m3)] {
            let ratio = b.quality().h / a.quality().h;
            assert!((0.45..=0.55).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn vertices_stay_on_sphere_and_quality_is_bounded() {
        for kind in [InitialMesh::CubeQuads, InitialMesh::IcosahedronTriangles] {
            let lift = radial();
            let mut m = SurfaceMesh::sphere(kind);
            let mut level1 = None;
            for level in 0..=5 {
                if level > 0 {
                    m = m.refine_uniform(&lift).unwrap();
                }
                assert!(m.vertices().iter().all(|v| (vec3::norm(v) - 1.0).abs() <= 1e-12));
                m.validate().unwrap();
                let q = m.quality();
                if level == 1 {
                    level1 = Some(q);
                }
                if let Some(q1) = level1 {
                    assert!(q.c_q <= 1.5 * q1.c_q, "{kind:?} level {level}: {q:?} vs {q1:?}");
                    assert!(q.c_j <= 1.5 * q1.c_j, "{kind:?} level {level}: {q:?} vs {q1:?}");
                    assert!(q.c_v as f64 <= 1.5 * q1.c_v as f64);
                }
            }
        }
    }

    #[test]
    fn area_converges_from_below_at_second_order() {
        for kind in [InitialMesh::CubeQuads, InitialMesh::IcosahedronTriangles] {
            let lift = radial();
            let mut m = SurfaceMesh::sphere(kind).refine_uniform(&lift).unwrap();
            let mut deficits = vec![];
            for _ in 0..5 {
                deficits.push(4.0 * PI - m.area());
                m = m.refine_uniform(&lift).unwrap();
            }
            assert!(deficits.iter().all(|&d| d > 0.0));
            for w in deficits.windows(2) {
                let r = w[0] / w[1];
                assert!((3.7..=4.3).contains(&r), "{kind:?} ratio {r}");
            }
        }
    }

    #[test]
    fn element_map_interpolates_nodes() {
        let em = ElementMap {
            cell: 0,
            kind: CellKind::Triangle,
            nodes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0; 3]],
        };
        assert_eq!(em.eval([0.0, 0.0]), [1.0, 0.0, 0.0]);
        let q = ElementMap {
            cell: 0,
            kind: CellKind::Quad,
            nodes: [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        };
        assert_eq!(q.eval([0.5, 0.5]), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn planar_cell_area_matches_polygon_formula() {
        let quad = ElementMap {
            cell: 0,
            kind: CellKind::Quad,
            nodes: [[0.0, 0.0, 1.0], [2.0, 0.1, 1.0], [2.5, 1.7, 1.0], [-0.3, 1.2, 1.0]],
        };
        let tri = ElementMap {
            cell: 0,
            kind: CellKind::Triangle,
            nodes: [[0.2, 0.0, 0.0], [1.0, 0.3, 0.5], [0.1, 0.9, 0.2], [0.0; 3]],
        };
        for em in [quad, tri] {
            let rule = QuadRule::for_cell(em.kind, 4);
            let integrated: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(xi, w)| w * vec3::area_element(&em.jacobian(*xi)))
                .sum();
            // shoelace via fan of cross products
            let n = em.kind.nodes();
            let mut s = [0.0; 3];
            for i in 0..n {
                s = vec3::add(&s, &vec3::cross(&em.nodes[i], &em.nodes[(i + 1) % n]));
            }
            let polygon = 0.5 * vec3::norm(&s);
            assert!((integrated - polygon).abs() < 1e-12, "{integrated} vs {polygon}");
        }
    }

    #[test]
    fn quality_invariant_under_rigid_motion() {
        let lift = radial();
        let m = SurfaceMesh::sphere_at_level(InitialMesh::CubeQuads, 2, &lift).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let moved = m.map_vertices(|v| [c * v[0] - s * v[1] + 2.0, s * v[0] + c * v[1] - 1.0, v[2] + 0.5]);
        let (a, b) = (m.quality(), moved.quality());
        assert!((a.h - b.h).abs() < 1e-12);
        assert!((a.c_q - b.c_q).abs() < 1e-10);
        assert!((a.c_j - b.c_j).abs() < 1e-10);
        assert_eq!(a.c_v, b.c_v);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let err = SurfaceMesh::new(
            CellKind::Triangle,
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 2],
        );
        assert!(err.is_err());
    }
}
