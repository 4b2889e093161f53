use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use fraclb::fem::FeSpace;
use fraclb::io;
use fraclb::lift::LiftKind;
use fraclb::mesh::InitialMesh;
use fraclb::sphere::ZonalEvaluator;
use fraclb::study::{self, DataKind, StudyConfig};
use fraclb::{Error, SolverKind};

/// Environment variable that fixes the number of worker threads.
const THREADS_VAR: &str = "FRACLB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "fraclb", version, about = "Fractional Laplace-Beltrami studies on the unit sphere")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// L2/H1 errors against the exact zonal solution over a range of levels.
    Converge(Common),
    /// Self-convergence of the sinc rule on a fixed mesh.
    SincStudy {
        #[command(flatten)]
        common: Common,
        /// Spacings to test, decreasing (comma separated).
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<f64>>,
        /// Reference spacing.
        #[arg(long)]
        k_ref: Option<f64>,
        /// Mesh level of the study.
        #[arg(long)]
        level: Option<usize>,
    },
    /// max|sigma - 1| for both lifts over a range of levels.
    SigmaStudy(Common),
    /// Solve on the last level and export VTK and a meridian trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the mass and stiffness matrices in MatrixMarket format.
        #[arg(long)]
        matrices: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fractional powers (comma separated).
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Sinc spacing.
    #[arg(long)]
    k: Option<f64>,
    /// Level range `A..B` (inclusive).
    #[arg(long)]
    levels: Option<String>,
    /// Initial mesh: cube or ico.
    #[arg(long)]
    mesh: Option<String>,
    /// Lift: sdf or generic.
    #[arg(long)]
    lift: Option<String>,
    /// Data: step or mode:<j>.
    #[arg(long)]
    data: Option<String>,
    /// Gauss points per direction for assembly.
    #[arg(long)]
    quad: Option<usize>,
    /// Gauss points per direction for error norms and sigma.
    #[arg(long)]
    diag_quad: Option<usize>,
    /// Shifted-system solver: direct or cg:<tol>.
    #[arg(long)]
    solver: Option<String>,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of modes of the exact solution.
    #[arg(long)]
    trunc: Option<usize>,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_levels(text: &str) -> Result<(usize, usize), Error> {
    let bad = || config_error(format!("levels must look like A..B, got `{text}`"));
    match text.split_once("..") {
        Some((a, b)) => Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => {
            let l = text.trim().parse().map_err(|_| bad())?;
            Ok((l, l))
        }
    }
}

fn parse_solver(text: &str) -> Result<SolverKind, Error> {
    if text == "direct" {
        return Ok(SolverKind::Direct);
    }
    text.strip_prefix("cg:")
        .and_then(|t| t.parse().ok())
        .map(|tol| SolverKind::Cg { tol })
        .ok_or_else(|| config_error(format!("solver must be `direct` or `cg:<tol>`, got `{text}`")))
}

fn parse_mesh(text: &str) -> Result<InitialMesh, Error> {
    match text {
        "cube" => Ok(InitialMesh::CubeQuads),
        "ico" => Ok(InitialMesh::IcosahedronTriangles),
        _ => Err(config_error(format!("mesh must be `cube` or `ico`, got `{text}`"))),
    }
}

fn parse_lift(text: &str) -> Result<LiftKind, Error> {
    match text {
        "sdf" => Ok(LiftKind::Sdf),
        "generic" => Ok(LiftKind::Generic),
        _ => Err(config_error(format!("lift must be `sdf` or `generic`, got `{text}`"))),
    }
}

impl Common {
    fn build(&self) -> Result<StudyConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                StudyConfig::from_toml(&text)?
            }
            None => StudyConfig::default(),
        };
        if let Some(s) = &self.s {
            cfg.s = s.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(levels) = &self.levels {
            (cfg.first_level, cfg.last_level) = parse_levels(levels)?;
        }
        if let Some(m) = &self.mesh {
            cfg.mesh = parse_mesh(m)?;
        }
        if let Some(l) = &self.lift {
            cfg.lift = parse_lift(l)?;
        }
        if let Some(d) = &self.data {
            cfg.data = d.parse::<DataKind>()?;
        }
        if let Some(q) = self.quad {
            cfg.assembly_order = q;
        }
        if let Some(q) = self.diag_quad {
            cfg.diagnostic_order = q;
        }
        if let Some(s) = &self.solver {
            cfg.solver = parse_solver(s)?;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        if let Some(j) = self.trunc {
            cfg.truncation = j;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome of a subcommand: `Ok(true)` when every cell completed.
type Run = Result<bool, Error>;

fn emit(cfg: &StudyConfig, name: &str, text: &str) -> Result<(), Error> {
    match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn converge(cfg: &StudyConfig) -> Run {
    let report = study::run_convergence(cfg)?;
    match &cfg.out_dir {
        Some(dir) => {
            for path in report.write(dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            for t in &report.tables {
                println!("# s = {}", t.s);
                print!("{}", t.csv());
            }
        }
    }
    for t in &report.tables {
        if t.s >= 0.5 && !t.l2_monotone() {
            eprintln!("warning: L2 error is not decreasing with level for s = {}", t.s);
        }
    }
    for f in &report.failures {
        eprintln!("failed: s = {}, level {}: {}", f.s, f.level, f.reason);
    }
    Ok(report.is_complete())
}

fn sinc_study(cfg: &StudyConfig) -> Run {
    let report = study::run_sinc_study(cfg)?;
    emit(cfg, "sinc_study.csv", &report.csv())?;
    let mut ok = true;
    for t in &report.tables {
        eprintln!("s = {}: slope of log error vs 1/k = {:.4}", t.s, t.slope);
        if !t.strictly_decreasing() {
            eprintln!("failed: errors do not decrease with k for s = {}", t.s);
            ok = false;
        }
    }
    Ok(ok)
}

fn sigma_study(cfg: &StudyConfig) -> Run {
    let report = study::run_sigma_study(cfg)?;
    emit(cfg, "sigma_study.csv", &report.csv())?;
    eprintln!(
        "slopes vs DoFs: signed distance {:.4}, generic {:.4}",
        report.slope_signed, report.slope_generic
    );
    Ok(true)
}

fn solve(cfg: &StudyConfig, matrices: bool) -> Run {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let lift = cfg.lift.build();
    let mesh = study::mesh_sequence(cfg.mesh, cfg.last_level..=cfg.last_level)?.remove(0);
    let disc = study::discretize(mesh.clone(), &lift, cfg.data, cfg.assembly_order)?;
    if matrices {
        std::fs::create_dir_all(&dir)?;
        io::write_matrix_market(&dir.join("mass.mtx"), &disc.mass)?;
        io::write_matrix_market(&dir.join("stiffness.mtx"), &disc.stiffness)?;
    }
    let solutions = study::solve_fractional(&disc, &cfg.s, cfg.k, cfg.solver)?;
    let series = cfg.data.series(cfg.truncation)?;
    let space = FeSpace::new(Arc::clone(&mesh));
    for (&s, u) in cfg.s.iter().zip(solutions) {
        let exact = ZonalEvaluator::new(&series, &[s]);
        let f = space.function(u)?;
        for path in study::export_solution(&f, &lift, &dir, &format!("solution_s{s}"), Some(&exact))? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(true)
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| config_error(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Cmd::Converge(c) => c.build().and_then(|cfg| converge(&cfg)),
        Cmd::SincStudy { common, ks, k_ref, level } => common
            .build()
            .and_then(|mut cfg| {
                if let Some(ks) = ks {
                    cfg.sinc_ks = ks.clone();
                }
                if let Some(k) = k_ref {
                    cfg.k_ref = *k;
                }
                if let Some(l) = level {
                    cfg.sinc_level = *l;
                }
                cfg.validate()?;
                Ok(cfg)
            })
            .and_then(|cfg| sinc_study(&cfg)),
        Cmd::SigmaStudy(c) => c.build().and_then(|cfg| sigma_study(&cfg)),
        Cmd::Solve { common, matrices } => common.build().and_then(|cfg| solve(&cfg, *matrices)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e @ (Error::Config(_) | Error::Io(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
