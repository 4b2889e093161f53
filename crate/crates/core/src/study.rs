//! Studies on the unit sphere: convergence in `h`, sinc self-convergence,
//! `σ` decay, and export of a single solution.
//!
//! Meshes are always refined with the orthogonal projection so that both
//! lifts are compared on the same sequence of surfaces `Γ`; the configured
//! lift enters the load and the error norms only.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace, SparseSpd, ASSEMBLY_ORDER, DIAGNOSTIC_ORDER};
use crate::io;
use crate::lift::{Lift, LiftKind};
use crate::mesh::{InitialMesh, SurfaceMesh};
use crate::norms::{self, errors_many};
use crate::sinc::{apply_fractional_inverse_many, ShiftedSolver, SincRule};
use crate::solver::SolverKind;
use crate::sphere::{legendre_pack, zeta_norm, StepData, ZonalEvaluator, ZonalSeries, DEFAULT_TRUNCATION};
use crate::vec3::{self, Vec3};

/// Number of samples on the geodesic trace `φ = 0`.
pub const TRACE_POINTS: usize = 512;

/// Right-hand side on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DataKind {
    /// `+1` on the upper hemisphere, `-1` on the lower one.
    Step,
    /// A single zonal eigenfunction `ζ_j`.
    Mode(usize),
}

impl DataKind {
    pub fn series(self, truncation: usize) -> Result<ZonalSeries> {
        match self {
            DataKind::Step => Ok(ZonalSeries::step(truncation)),
            DataKind::Mode(j) => ZonalSeries::single_mode(j),
        }
    }

    /// `f̃(p)` for `p` on the sphere.
    pub fn value(self, p: &Vec3) -> f64 {
        match self {
            DataKind::Step => StepData::value(p),
            DataKind::Mode(j) => {
                let (pj, _) = legendre_pack(j, p[2].clamp(-1.0, 1.0));
                zeta_norm(j) * pj[j]
            }
        }
    }
}

impl FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "step" {
            return Ok(DataKind::Step);
        }
        let j = s
            .strip_prefix("mode:")
            .and_then(|j| j.parse::<usize>().ok())
            .ok_or_else(|| Error::Config(format!("data must be `step` or `mode:<j>`, got `{s}`")))?;
        if j == 0 {
            return Err(Error::Config("mode 0 is constant and has no fractional inverse".into()));
        }
        Ok(DataKind::Mode(j))
    }
}

impl TryFrom<String> for DataKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DataKind> for String {
    fn from(d: DataKind) -> String {
        d.to_string()
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataKind::Step => write!(f, "step"),
            DataKind::Mode(j) => write!(f, "mode:{j}"),
        }
    }
}

/// Parameters shared by all studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub s: Vec<f64>,
    pub k: f64,
    pub mesh: InitialMesh,
    pub first_level: usize,
    pub last_level: usize,
    pub lift: LiftKind,
    pub data: DataKind,
    pub assembly_order: usize,
    pub diagnostic_order: usize,
    pub solver: SolverKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub truncation: usize,
    /// Spacings of the sinc study, decreasing.
    pub sinc_ks: Vec<f64>,
    pub k_ref: f64,
    pub sinc_level: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            s: vec![0.3, 0.5, 0.7],
            k: 0.15,
            mesh: InitialMesh::CubeQuads,
            first_level: 2,
            last_level: 5,
            lift: LiftKind::Sdf,
            data: DataKind::Step,
            assembly_order: ASSEMBLY_ORDER,
            diagnostic_order: DIAGNOSTIC_ORDER,
            solver: SolverKind::Direct,
            out_dir: None,
            truncation: DEFAULT_TRUNCATION,
            sinc_ks: vec![0.6, 0.45, 0.3],
            k_ref: 0.05,
            sinc_level: 3,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.s.is_empty() {
            return bad("at least one value of s is required".into());
        }
        if let Some(s) = self.s.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return bad(format!("s must lie in (0, 1), got {s}"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if self.first_level > self.last_level {
            return bad(format!("empty level range {}..{}", self.first_level, self.last_level));
        }
        if self.last_level > 9 {
            return bad(format!("level {} is beyond desk scale", self.last_level));
        }
        if self.assembly_order == 0 || self.assembly_order > 32 {
            return bad(format!("assembly quadrature order {} out of range", self.assembly_order));
        }
        if self.diagnostic_order < 4 || self.diagnostic_order > 32 {
            return bad(format!("diagnostic quadrature order must be in 4..=32, got {}", self.diagnostic_order));
        }
        if let SolverKind::Cg { tol } = self.solver {
            if !(tol > 0.0 && tol < 1.0) {
                return bad(format!("CG tolerance must lie in (0, 1), got {tol}"));
            }
        }
        if self.truncation == 0 {
            return bad("truncation must be positive".into());
        }
        if self.sinc_ks.iter().any(|k| !(*k > 0.0)) || self.sinc_ks.windows(2).any(|w| w[1] >= w[0]) {
            return bad("sinc spacings must be positive and strictly decreasing".into());
        }
        if !(self.k_ref > 0.0) || self.sinc_ks.iter().any(|k| *k <= self.k_ref) {
            return bad("reference spacing must be positive and below every study spacing".into());
        }
        Ok(())
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<usize> {
        self.first_level..=self.last_level
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Meshes of the configured family for every level, refined with the orthogonal projection.
pub fn mesh_sequence(kind: InitialMesh, levels: std::ops::RangeInclusive<usize>) -> Result<Vec<Arc<SurfaceMesh>>> {
    let radial = Lift::unit_sphere();
    let mut mesh = SurfaceMesh::sphere_at_level(kind, *levels.start(), &radial)?;
    let mut out = vec![];
    for level in levels.clone() {
        if level > *levels.start() {
            mesh = mesh.refine_uniform(&radial)?;
        }
        out.push(Arc::new(mesh.clone()));
    }
    Ok(out)
}

/// Mass, stiffness and `σ`-weighted load on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub space: FeSpace,
    pub mass: SparseSpd,
    pub stiffness: SparseSpd,
    pub load: Vec<f64>,
}

pub fn discretize(mesh: Arc<SurfaceMesh>, lift: &Lift, data: DataKind, order: usize) -> Result<Discretization> {
    let space = FeSpace::new(mesh);
    let mass = space.assemble_mass(order)?;
    let stiffness = space.assemble_stiffness(order)?;
    let load = space.assemble_load_sigma(lift, |p| data.value(p), order)?;
    Ok(Discretization {
        space,
        mass,
        stiffness,
        load,
    })
}

/// `U_k` for every power in `powers`, all with spacing `k`.
pub fn solve_fractional(disc: &Discretization, powers: &[f64], k: f64, solver: SolverKind) -> Result<Vec<Vec<f64>>> {
    let rules = powers.iter().map(|&s| SincRule::new(s, k)).collect::<Result<Vec<_>>>()?;
    let shifted = ShiftedSolver::new(&disc.mass, &disc.stiffness, solver)?;
    apply_fractional_inverse_many(&rules, &shifted, &disc.load)
}

/// One completed `(s, level)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dofs: usize,
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    pub l2_slope: Option<f64>,
    pub h1_slope: Option<f64>,
    /// `1ᵀ M U_k`.
    pub mean_moment: f64,
    /// `‖b‖₂ ‖1‖₂`.
    pub load_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub s: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn last_l2_slope(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.l2_slope)
    }

    pub fn last_h1_slope(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.h1_slope)
    }

    /// `L²` errors decrease along the completed levels.
    pub fn l2_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error)
    }

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(io::fmt_f64).unwrap_or_default();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.level.to_string(),
                    r.dofs.to_string(),
                    io::fmt_f64(r.h),
                    io::fmt_f64(r.l2_error),
                    io::fmt_f64(r.h1_error),
                    opt(r.l2_slope),
                    opt(r.h1_slope),
                ]
            })
            .collect();
        io::csv_string(
            &["level", "dofs", "h", "l2_error", "h1_error", "l2_slope", "h1_slope"],
            &rows,
        )
    }
}

/// A cell that did not complete, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub s: f64,
    pub level: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelTiming {
    pub level: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub tables: Vec<ConvergenceTable>,
    pub failures: Vec<CellFailure>,
    pub timing: Vec<LevelTiming>,
}

impl ConvergenceReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn table(&self, s: f64) -> Option<&ConvergenceTable> {
        self.tables.iter().find(|t| t.s == s)
    }

    /// Writes one CSV per `s` and a JSON mirror with run metadata.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = vec![];
        for t in &self.tables {
            let path = dir.join(format!("convergence_s{}.csv", t.s));
            fs::write(&path, t.csv())?;
            written.push(path);
        }
        let path = dir.join("convergence.json");
        let total: f64 = self.timing.iter().map(|t| t.seconds).sum();
        let meta = serde_json::json!({
            "git_hash": git_hash(),
            "seconds": total,
            "report": self,
        });
        fs::write(&path, serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?)?;
        written.push(path);
        Ok(written)
    }
}

pub fn git_hash() -> String {
    Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

struct LevelOutcome {
    dofs: usize,
    h: f64,
    /// Per power: `(L², H¹, 1ᵀMU)`.
    per_s: Vec<(f64, f64, f64)>,
    load_scale: f64,
}

fn run_level(
    cfg: &StudyConfig,
    mesh: Arc<SurfaceMesh>,
    lift: &Lift,
    exact: &ZonalEvaluator,
) -> Result<LevelOutcome> {
    let disc = discretize(mesh.clone(), lift, cfg.data, cfg.assembly_order)?;
    let solutions = solve_fractional(&disc, &cfg.s, cfg.k, cfg.solver)?;
    let coeffs: Vec<&[f64]> = solutions.iter().map(|u| u.as_slice()).collect();
    let errors = errors_many(&mesh, lift, &coeffs, exact, cfg.diagnostic_order)?;
    let ones = vec![1.0; disc.space.n_dofs()];
    let load_scale = vec3_norm(&disc.load) * (ones.len() as f64).sqrt();
    let per_s = errors
        .iter()
        .zip(&solutions)
        .map(|(e, u)| (e.l2, e.h1(), disc.mass.inner(&ones, u)))
        .collect::<Vec<_>>();
    if per_s.iter().any(|(a, b, _)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::invalid("non-finite error norm"));
    }
    Ok(LevelOutcome {
        dofs: disc.space.n_dofs(),
        h: mesh.quality().h,
        per_s,
        load_scale,
    })
}

fn vec3_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Errors `‖Pũ − U_k‖` in `L²(Γ)` and `H¹(Γ)` over the configured levels.
///
/// A failing level is recorded for every `s` and the remaining levels still
/// run; slopes connect consecutive completed rows.
pub fn run_convergence(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let lift = cfg.lift.build();
    let series = cfg.data.series(cfg.truncation)?;
    let exact = ZonalEvaluator::new(&series, &cfg.s);
    let meshes = mesh_sequence(cfg.mesh, cfg.levels())?;
    let mut tables: Vec<ConvergenceTable> = cfg.s.iter().map(|&s| ConvergenceTable { s, rows: vec![] }).collect();
    let mut failures = vec![];
    let mut timing = vec![];
    for mesh in meshes {
        let level = mesh.level();
        let start = Instant::now();
        match run_level(cfg, mesh, &lift, &exact) {
            Ok(out) => {
                for (table, &(l2, h1, moment)) in tables.iter_mut().zip(&out.per_s) {
                    let (l2_slope, h1_slope) = match table.rows.last() {
                        Some(prev) => {
                            let fit_l2 = norms::fit_rates(&[prev.dofs, out.dofs], &[prev.l2_error, l2]);
                            let fit_h1 = norms::fit_rates(&[prev.dofs, out.dofs], &[prev.h1_error, h1]);
                            (fit_l2.ok().map(|f| f.last), fit_h1.ok().map(|f| f.last))
                        }
                        None => (None, None),
                    };
                    table.rows.push(ConvergenceRow {
                        level,
                        dofs: out.dofs,
                        h: out.h,
                        l2_error: l2,
                        h1_error: h1,
                        l2_slope,
                        h1_slope,
                        mean_moment: moment,
                        load_scale: out.load_scale,
                    });
                }
            }
            Err(e) => {
                for &s in &cfg.s {
                    failures.push(CellFailure {
                        s,
                        level,
                        reason: e.to_string(),
                    });
                }
            }
        }
        timing.push(LevelTiming {
            level,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceReport {
        config: cfg.clone(),
        tables,
        failures,
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SincRow {
    pub k: f64,
    pub nodes: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SincTable {
    pub s: f64,
    pub rows: Vec<SincRow>,
    /// Least-squares slope of `log error` against `1/k`.
    pub slope: f64,
}

impl SincTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SincReport {
    pub level: usize,
    pub dofs: usize,
    pub k_ref: f64,
    pub tables: Vec<SincTable>,
}

impl SincReport {
    pub fn csv(&self) -> String {
        let mut rows = vec![];
        for t in &self.tables {
            for r in &t.rows {
                rows.push(vec![
                    t.s.to_string(),
                    r.k.to_string(),
                    r.nodes.to_string(),
                    io::fmt_f64(r.error),
                ]);
            }
        }
        io::csv_string(&["s", "k", "nodes", "error"], &rows)
    }
}

/// `‖U_k − U_{k_ref}‖_M` on a fixed mesh for each spacing `k`.
pub fn run_sinc_study(cfg: &StudyConfig) -> Result<SincReport> {
    cfg.validate()?;
    if cfg.sinc_ks.is_empty() {
        return Err(Error::Config("the sinc study needs at least one spacing".into()));
    }
    let lift = cfg.lift.build();
    let mesh = mesh_sequence(cfg.mesh, cfg.sinc_level..=cfg.sinc_level)?.remove(0);
    let disc = discretize(mesh, &lift, cfg.data, cfg.assembly_order)?;
    let reference = solve_fractional(&disc, &cfg.s, cfg.k_ref, cfg.solver)?;
    let mut tables: Vec<SincTable> = cfg
        .s
        .iter()
        .map(|&s| SincTable {
            s,
            rows: vec![],
            slope: f64::NAN,
        })
        .collect();
    for &k in &cfg.sinc_ks {
        let solutions = solve_fractional(&disc, &cfg.s, k, cfg.solver)?;
        for ((table, u), r) in tables.iter_mut().zip(&solutions).zip(&reference) {
            let d: Vec<f64> = u.iter().zip(r).map(|(a, b)| a - b).collect();
            table.rows.push(SincRow {
                k,
                nodes: SincRule::new(table.s, k)?.len(),
                error: disc.mass.inner(&d, &d).sqrt(),
            });
        }
    }
    for t in &mut tables {
        if t.rows.len() >= 2 {
            let x: Vec<f64> = t.rows.iter().map(|r| 1.0 / r.k).collect();
            let y: Vec<f64> = t.rows.iter().map(|r| r.error.ln()).collect();
            t.slope = norms::linear_slope(&x, &y);
        }
    }
    Ok(SincReport {
        level: cfg.sinc_level,
        dofs: disc.space.n_dofs(),
        k_ref: cfg.k_ref,
        tables,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaRow {
    pub level: usize,
    pub dofs: usize,
    pub h: f64,
    pub sigma_dev_signed: f64,
    pub sigma_dev_generic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaReport {
    pub rows: Vec<SigmaRow>,
    /// Fitted slopes of `log max|σ − 1|` against `log DoFs`.
    pub slope_signed: f64,
    pub slope_generic: f64,
}

impl SigmaReport {
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.level.to_string(),
                    r.dofs.to_string(),
                    io::fmt_f64(r.h),
                    io::fmt_f64(r.sigma_dev_signed),
                    io::fmt_f64(r.sigma_dev_generic),
                ]
            })
            .collect();
        io::csv_string(&["level", "dofs", "h", "sigma_dev_signed", "sigma_dev_generic"], &rows)
    }
}

/// `max|σ − 1|` for both lifts over the configured levels.
pub fn run_sigma_study(cfg: &StudyConfig) -> Result<SigmaReport> {
    cfg.validate()?;
    let signed = LiftKind::Sdf.build();
    let generic = LiftKind::Generic.build();
    let mut rows = vec![];
    for mesh in mesh_sequence(cfg.mesh, cfg.levels())? {
        rows.push(SigmaRow {
            level: mesh.level(),
            dofs: mesh.n_vertices(),
            h: mesh.quality().h,
            sigma_dev_signed: signed.sigma_sup_deviation(&mesh, cfg.diagnostic_order)?,
            sigma_dev_generic: generic.sigma_sup_deviation(&mesh, cfg.diagnostic_order)?,
        });
    }
    let dofs: Vec<f64> = rows.iter().map(|r| r.dofs as f64).collect();
    let fit = |f: fn(&SigmaRow) -> f64| {
        if rows.len() < 2 {
            f64::NAN
        } else {
            norms::loglog_slope(&dofs, &rows.iter().map(f).collect::<Vec<_>>())
        }
    };
    let slope_signed = fit(|r| r.sigma_dev_signed);
    let slope_generic = fit(|r| r.sigma_dev_generic);
    Ok(SigmaReport {
        rows,
        slope_signed,
        slope_generic,
    })
}

/// Cell and reference coordinates `ξ` with `P(F_τ(ξ)) = p`.
///
/// Candidate cells are those whose vertices are within one cell diameter of
/// `p`; on each, projected Gauss-Newton iterations minimise `|Φ(ξ) − p|`.
/// Where the image of `Γ` has gaps (generic lift), the nearest point wins.
pub fn locate(mesh: &SurfaceMesh, lift: &Lift, p: &Vec3) -> Result<(usize, [f64; 2])> {
    let mut best: Option<(f64, usize, [f64; 2])> = None;
    for id in 0..mesh.n_cells() {
        let em = mesh.element_map(id);
        let near = em.nodes[..mesh.cell_kind().nodes()]
            .iter()
            .any(|v| vec3::dist(v, p) <= em.diameter() * 1.01);
        if !near {
            continue;
        }
        let mut xi = match mesh.cell_kind() {
            crate::mesh::CellKind::Triangle => [1.0 / 3.0, 1.0 / 3.0],
            crate::mesh::CellKind::Quad => [0.5, 0.5],
        };
        let mut res = f64::INFINITY;
        for _ in 0..30 {
            let (q, d) = lift.composite_jacobian(&em, xi)?;
            let r = vec3::sub(&q, p);
            res = vec3::norm(&r);
            if res < 1e-14 {
                break;
            }
            let g = vec3::metric(&d);
            let rhs = [vec3::dot(&d[0], &r), vec3::dot(&d[1], &r)];
            let det = g[0] * g[2] - g[1] * g[1];
            if !(det > 0.0) {
                break;
            }
            let step = [(g[2] * rhs[0] - g[1] * rhs[1]) / det, (g[0] * rhs[1] - g[1] * rhs[0]) / det];
            let next = clamp_reference(mesh.cell_kind(), [xi[0] - step[0], xi[1] - step[1]]);
            if (next[0] - xi[0]).abs() + (next[1] - xi[1]).abs() < 1e-15 {
                break;
            }
            xi = next;
        }
        let (q, _) = lift.composite_jacobian(&em, xi)?;
        res = res.min(vec3::dist(&q, p));
        if best.is_none_or(|(b, _, _)| res < b - 1e-14) {
            best = Some((res, id, xi));
        }
    }
    best.map(|(_, id, xi)| (id, xi))
        .ok_or_else(|| Error::invalid(format!("point {p:?} is not near the mesh")))
}

fn clamp_reference(kind: crate::mesh::CellKind, xi: [f64; 2]) -> [f64; 2] {
    match kind {
        crate::mesh::CellKind::Quad => [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)],
        crate::mesh::CellKind::Triangle => {
            let a = xi[0].max(0.0);
            let b = xi[1].max(0.0);
            let s = a + b;
            if s > 1.0 {
                [a / s, b / s]
            } else {
                [a, b]
            }
        }
    }
}

/// A sample of the discrete solution along the meridian `φ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub theta: f64,
    pub u_h: f64,
    pub u_exact: Option<f64>,
}

/// `U` at `n` uniform `θ ∈ [0, π]` on the meridian `φ = 0`.
pub fn geodesic_trace(u: &FeFunction, lift: &Lift, n: usize, exact: Option<&ZonalEvaluator>) -> Result<Vec<TracePoint>> {
    if n < 2 {
        return Err(Error::invalid("a trace needs at least two samples"));
    }
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (n - 1) as f64;
            let p = [theta.sin(), 0.0, theta.cos()];
            let (cell, xi) = locate(u.space.mesh(), lift, &p)?;
            Ok(TracePoint {
                theta,
                u_h: u.evaluate(cell, xi).0,
                u_exact: exact.map(|e| e.value_at(p[2])[0]),
            })
        })
        .collect()
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|t| {
            vec![
                io::fmt_f64(t.theta),
                io::fmt_f64(t.u_h),
                t.u_exact.map(io::fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    io::csv_string(&["theta", "u_h", "u_exact"], &rows)
}

/// Writes `<stem>.vtk` with point data `u` and `<stem>_trace.csv`.
pub fn export_solution(
    u: &FeFunction,
    lift: &Lift,
    dir: &Path,
    stem: &str,
    exact: Option<&ZonalEvaluator>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let vtk = dir.join(format!("{stem}.vtk"));
    io::write_vtk(&vtk, u.space.mesh(), &[("u", &u.coeffs)])?;
    let trace = dir.join(format!("{stem}_trace.csv"));
    fs::write(&trace, trace_csv(&geodesic_trace(u, lift, TRACE_POINTS, exact)?))?;
    Ok(vec![vtk, trace])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> StudyConfig {
        StudyConfig {
            s: vec![0.5],
            k: 0.4,
            first_level: 1,
            last_level: 2,
            truncation: 200,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn data_kind_parsing() {
        assert_eq!("step".parse::<DataKind>().unwrap(), DataKind::Step);
        assert_eq!("mode:3".parse::<DataKind>().unwrap(), DataKind::Mode(3));
        assert!("mode:0".parse::<DataKind>().is_err());
        assert!("modes".parse::<DataKind>().is_err());
        assert_eq!(DataKind::Mode(7).to_string(), "mode:7");
    }

    #[test]
    fn mode_data_is_the_eigenfunction() {
        let p = [0.6, 0.0, 0.8];
        let expected = (3.0 / (4.0 * std::f64::consts::PI)).sqrt() * 0.8;
        assert!((DataKind::Mode(1).value(&p) - expected).abs() < 1e-15);
    }

    #[test]
    fn config_round_trip_and_validation() {
        let mut cfg = StudyConfig::default();
        cfg.out_dir = Some("results".into());
        cfg.solver = SolverKind::Cg { tol: 1e-10 };
        cfg.data = DataKind::Mode(3);
        let text = cfg.to_toml().unwrap();
        assert_eq!(StudyConfig::from_toml(&text).unwrap(), cfg);
        let partial = StudyConfig::from_toml("s = [0.25]\nmesh = \"ico\"\n").unwrap();
        assert_eq!(partial.mesh, InitialMesh::IcosahedronTriangles);
        assert_eq!(partial.k, 0.15);
        for bad in ["s = [1.0]", "k = 0.0", "first_level = 4\nlast_level = 3", "data = \"mode:0\"", "typo = 1"] {
            assert!(StudyConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn small_convergence_run_is_deterministic() {
        let cfg = small_config();
        let a = run_convergence(&cfg).unwrap();
        let b = run_convergence(&cfg).unwrap();
        assert!(a.is_complete());
        assert_eq!(a.tables[0].csv(), b.tables[0].csv());
        let rows = &a.tables[0].rows;
        assert_eq!(rows.len(), 2);
        assert!(rows[0].l2_slope.is_none() && rows[1].l2_slope.is_some());
        assert!(rows.iter().all(|r| r.h1_error >= r.l2_error));
        let csv = a.tables[0].csv();
        assert!(csv.starts_with("level,dofs,h,l2_error,h1_error,l2_slope,h1_slope\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn sinc_study_at_reference_spacing_is_exact() {
        let cfg = StudyConfig {
            sinc_ks: vec![0.8, 0.5],
            k_ref: 0.5 - 1e-12,
            sinc_level: 1,
            ..small_config()
        };
        // k = 0.5 and k_ref differ by rounding only: same truncation, same nodes up to 1e-12
        let report = run_sinc_study(&cfg).unwrap();
        let rows = &report.tables[0].rows;
        assert!(rows[1].error < 1e-9 * rows[0].error.max(1.0));
        assert!(rows[0].error > rows[1].error);
    }

    #[test]
    fn sigma_study_columns() {
        let report = run_sigma_study(&small_config()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.sigma_dev_signed > 0.0 && r.sigma_dev_generic > 0.0));
        assert!(report.csv().starts_with("level,dofs,h,sigma_dev_signed,sigma_dev_generic\n"));
    }

    #[test]
    fn locate_recovers_mesh_points() {
        let lift = Lift::unit_sphere();
        let mesh = SurfaceMesh::sphere_at_level(InitialMesh::CubeQuads, 2, &lift).unwrap();
        let em = mesh.element_map(17);
        let (p, _) = lift.composite_jacobian(&em, [0.3, 0.6]).unwrap();
        let (cell, xi) = locate(&mesh, &lift, &p).unwrap();
        let (q, _) = lift.composite_jacobian(&mesh.element_map(cell), xi).unwrap();
        assert!(vec3::dist(&p, &q) < 1e-12);
        assert_eq!(cell, 17);
        assert!((xi[0] - 0.3).abs() < 1e-10 && (xi[1] - 0.6).abs() < 1e-10);
    }

    #[test]
    fn constant_field_exports_equal_point_data() {
        let dir = tempfile::tempdir().unwrap();
        let lift = Lift::unit_sphere();
        let mesh = Arc::new(SurfaceMesh::sphere_at_level(InitialMesh::IcosahedronTriangles, 1, &lift).unwrap());
        let u = FeSpace::new(mesh).interpolate(|_| 0.25);
        let files = export_solution(&u, &lift, dir.path(), "const", None).unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        let data: Vec<f64> = text
            .split("LOOKUP_TABLE default\n")
            .nth(1)
            .unwrap()
            .lines()
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(data.len(), 42);
        assert!(data.iter().all(|&v| v == 0.25));
        let trace = fs::read_to_string(&files[1]).unwrap();
        assert_eq!(trace.lines().count(), TRACE_POINTS + 1);
        assert!(trace.lines().skip(1).all(|l| (l.split(',').nth(1).unwrap().parse::<f64>().unwrap() - 0.25).abs() < 1e-14));
    }
}
