//! Python bindings for the `fraclb` solver.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fraclb::lift::LiftKind;
use fraclb::mesh::InitialMesh;
use fraclb::norms::errors_many;
use fraclb::sphere::ZonalEvaluator;
use fraclb::study::{self, DataKind, Discretization, StudyConfig};
use fraclb::{Error, SincRule, SolverKind, SurfaceMesh, ZonalSeries};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_mesh(kind: &str) -> PyResult<InitialMesh> {
    match kind {
        "cube" => Ok(InitialMesh::CubeQuads),
        "ico" => Ok(InitialMesh::IcosahedronTriangles),
        _ => Err(PyValueError::new_err(format!("mesh must be 'cube' or 'ico', got '{kind}'"))),
    }
}

fn parse_lift(kind: &str) -> PyResult<LiftKind> {
    match kind {
        "sdf" => Ok(LiftKind::Sdf),
        "generic" => Ok(LiftKind::Generic),
        _ => Err(PyValueError::new_err(format!("lift must be 'sdf' or 'generic', got '{kind}'"))),
    }
}

fn parse_solver(text: &str) -> PyResult<SolverKind> {
    if text == "direct" {
        return Ok(SolverKind::Direct);
    }
    text.strip_prefix("cg:")
        .and_then(|t| t.parse().ok())
        .map(|tol| SolverKind::Cg { tol })
        .ok_or_else(|| PyValueError::new_err(format!("solver must be 'direct' or 'cg:<tol>', got '{text}'")))
}

fn parse_data(text: &str) -> PyResult<DataKind> {
    text.parse().map_err(to_py)
}

/// A sphere mesh from the cube or icosahedron family.
#[pyclass(name = "SurfaceMesh", module = "pyfraclb", frozen)]
struct PySurfaceMesh {
    inner: Arc<SurfaceMesh>,
}

#[pymethods]
impl PySurfaceMesh {
    #[staticmethod]
    #[pyo3(signature = (kind = "cube", level = 0))]
    fn sphere(kind: &str, level: usize) -> PyResult<Self> {
        let mesh = study::mesh_sequence(parse_mesh(kind)?, level..=level).map_err(to_py)?.remove(0);
        Ok(PySurfaceMesh { inner: mesh })
    }

    fn refine(&self) -> PyResult<Self> {
        let mesh = self.inner.refine_uniform(&fraclb::Lift::unit_sphere()).map_err(to_py)?;
        Ok(PySurfaceMesh { inner: Arc::new(mesh) })
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level()
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices().to_vec()
    }

    #[getter]
    fn cells(&self) -> Vec<Vec<usize>> {
        self.inner.cells().map(|c| c.to_vec()).collect()
    }

    fn euler_characteristic(&self) -> i64 {
        self.inner.euler_characteristic()
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    /// `{"h", "c_q", "c_j", "c_v"}`.
    fn quality<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let q = self.inner.quality();
        let d = PyDict::new(py);
        d.set_item("h", q.h)?;
        d.set_item("c_q", q.c_q)?;
        d.set_item("c_j", q.c_j)?;
        d.set_item("c_v", q.c_v)?;
        Ok(d)
    }

    /// `max |σ − 1|` at the Gauss points of the given order.
    #[pyo3(signature = (lift = "sdf", order = 6))]
    fn sigma_deviation(&self, lift: &str, order: usize) -> PyResult<f64> {
        parse_lift(lift)?.build().sigma_sup_deviation(&self.inner, order).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SurfaceMesh(level={}, vertices={}, cells={})",
            self.inner.level(),
            self.inner.n_vertices(),
            self.inner.n_cells()
        )
    }
}

/// The sinc rule for `λ^{-s}` with spacing `k`.
#[pyclass(name = "SincRule", module = "pyfraclb", frozen)]
struct PySincRule {
    inner: SincRule,
}

#[pymethods]
impl PySincRule {
    #[new]
    fn new(s: f64, k: f64) -> PyResult<Self> {
        Ok(PySincRule {
            inner: SincRule::new(s, k).map_err(to_py)?,
        })
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn shifts(&self) -> Vec<f64> {
        self.inner.indices().map(|l| self.inner.shift(l)).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.indices().map(|l| self.inner.weight(l)).collect()
    }

    /// `q_k(λ) ≈ λ^{-s}`.
    fn __call__(&self, lam: f64) -> PyResult<f64> {
        self.inner.scalar_apply(lam).map_err(to_py)
    }

    fn error_bound(&self, r: f64, t: f64) -> PyResult<f64> {
        self.inner.error_bound(r, t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SincRule(s={}, k={}, m={}, n={})", self.inner.s, self.inner.k, self.inner.m, self.inner.n)
    }
}

/// Mass, stiffness and load for step or single-mode data on a sphere mesh.
#[pyclass(name = "Problem", module = "pyfraclb")]
struct PyProblem {
    disc: Discretization,
    lift: LiftKind,
    data: DataKind,
}

fn csr(m: &fraclb::SparseSpd) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    (m.row_ptr.clone(), m.col_idx.clone(), m.values.clone())
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (mesh, lift = "sdf", data = "step", order = 4))]
    fn new(mesh: &PySurfaceMesh, lift: &str, data: &str, order: usize) -> PyResult<Self> {
        let lift = parse_lift(lift)?;
        let data = parse_data(data)?;
        let disc = study::discretize(mesh.inner.clone(), &lift.build(), data, order).map_err(to_py)?;
        Ok(PyProblem { disc, lift, data })
    }

    #[getter]
    fn n_dofs(&self) -> usize {
        self.disc.space.n_dofs()
    }

    #[getter]
    fn load(&self) -> Vec<f64> {
        self.disc.load.clone()
    }

    /// `(row_ptr, col_idx, values)` of the mass matrix.
    fn mass(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        csr(&self.disc.mass)
    }

    /// `(row_ptr, col_idx, values)` of the stiffness matrix.
    fn stiffness(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        csr(&self.disc.stiffness)
    }

    /// Coefficients of `U_k` for each power in `s`.
    #[pyo3(signature = (s, k = 0.15, solver = "direct"))]
    fn solve(&self, py: Python<'_>, s: Vec<f64>, k: f64, solver: &str) -> PyResult<Vec<Vec<f64>>> {
        let solver = parse_solver(solver)?;
        let disc = &self.disc;
        py.detach(|| study::solve_fractional(disc, &s, k, solver)).map_err(to_py)
    }

    /// `(L², H¹)` errors of `coeffs` against the exact solution for power `s`.
    #[pyo3(signature = (coeffs, s, truncation = 10000, order = 6))]
    fn errors(&self, coeffs: Vec<f64>, s: f64, truncation: usize, order: usize) -> PyResult<(f64, f64)> {
        let series = self.data.series(truncation).map_err(to_py)?;
        let exact = ZonalEvaluator::new(&series, &[s]);
        let e = errors_many(self.disc.space.mesh(), &self.lift.build(), &[&coeffs], &exact, order).map_err(to_py)?;
        Ok((e[0].l2, e[0].h1()))
    }

    /// Writes `<stem>.vtk` and `<stem>_trace.csv` into `directory`.
    #[pyo3(signature = (coeffs, directory, stem = "solution"))]
    fn export(&self, coeffs: Vec<f64>, directory: &str, stem: &str) -> PyResult<Vec<String>> {
        let f = self.disc.space.function(coeffs).map_err(to_py)?;
        let files = study::export_solution(&f, &self.lift.build(), std::path::Path::new(directory), stem, None)
            .map_err(to_py)?;
        Ok(files.into_iter().map(|p| p.display().to_string()).collect())
    }
}

/// Exact zonal solution `ũ(θ)` for power `s`.
#[pyfunction]
#[pyo3(signature = (theta, s, data = "step", truncation = 10000))]
fn exact_solution(theta: Vec<f64>, s: f64, data: &str, truncation: usize) -> PyResult<Vec<f64>> {
    let series: ZonalSeries = parse_data(data)?.series(truncation).map_err(to_py)?;
    let ev = ZonalEvaluator::new(&series, &[s]);
    Ok(theta.iter().map(|t| ev.value_at(t.cos())[0]).collect())
}

/// Runs the convergence study and returns `{s: [row, ...]}` with one dict per level.
#[pyfunction]
#[pyo3(signature = (s, levels = (2, 5), mesh = "cube", lift = "sdf", data = "step", k = 0.15, truncation = 10000, solver = "direct"))]
#[allow(clippy::too_many_arguments)]
fn run_convergence<'py>(
    py: Python<'py>,
    s: Vec<f64>,
    levels: (usize, usize),
    mesh: &str,
    lift: &str,
    data: &str,
    k: f64,
    truncation: usize,
    solver: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = StudyConfig {
        s,
        k,
        mesh: parse_mesh(mesh)?,
        first_level: levels.0,
        last_level: levels.1,
        lift: parse_lift(lift)?,
        data: parse_data(data)?,
        solver: parse_solver(solver)?,
        truncation,
        ..StudyConfig::default()
    };
    let report = py.detach(|| study::run_convergence(&cfg)).map_err(to_py)?;
    if let Some(f) = report.failures.first() {
        return Err(PyRuntimeError::new_err(format!("level {} failed: {}", f.level, f.reason)));
    }
    let out = PyDict::new(py);
    for t in &report.tables {
        let mut rows = vec![];
        for r in &t.rows {
            let d = PyDict::new(py);
            d.set_item("level", r.level)?;
            d.set_item("dofs", r.dofs)?;
            d.set_item("h", r.h)?;
            d.set_item("l2_error", r.l2_error)?;
            d.set_item("h1_error", r.h1_error)?;
            d.set_item("l2_slope", r.l2_slope)?;
            d.set_item("h1_slope", r.h1_slope)?;
            rows.push(d);
        }
        out.set_item(t.s, rows)?;
    }
    Ok(out)
}

#[pymodule]
fn pyfraclb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySurfaceMesh>()?;
    m.add_class::<PySincRule>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(exact_solution, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence, m)?)?;
    Ok(())
}
