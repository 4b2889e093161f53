use std::process::Command;

fn fraclb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraclb"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn converge_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let status = fraclb()
        .args(["converge", "--s", "0.5,0.7", "--levels", "1..2", "--trunc", "100", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("convergence_s0.5.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "level,dofs,h,l2_error,h1_error,l2_slope,h1_slope");
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("convergence.json")).unwrap()).unwrap();
    assert!(json["git_hash"].is_string());
    assert_eq!(json["report"]["tables"].as_array().unwrap().len(), 2);
}

#[test]
fn identical_runs_give_identical_csv() {
    let run = || {
        fraclb()
            .args(["converge", "--s", "0.4", "--levels", "1..2", "--mesh", "ico", "--trunc", "80"])
            .output()
            .unwrap()
            .stdout
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn config_errors_exit_with_one() {
    assert_eq!(code(fraclb().args(["converge", "--s", "1.2"])), 1);
    assert_eq!(code(fraclb().args(["converge", "--levels", "4..2"])), 1);
    assert_eq!(code(fraclb().args(["converge", "--mesh", "torus"])), 1);
    assert_eq!(code(fraclb().args(["converge", "--solver", "lu"])), 1);
    assert_eq!(code(fraclb().args(["converge", "--data", "mode:0"])), 1);
    assert_eq!(code(fraclb().args(["converge", "--no-such-flag"])), 1);
    assert_eq!(code(fraclb().args(["sinc-study", "--ks", "0.3,0.6"])), 1);
    assert_eq!(code(fraclb().args(["sigma-study", "--levels", "1..2"]).env("FRACLB_THREADS", "zero")), 1);
}

#[test]
fn failed_cells_exit_with_two() {
    // an unreachable CG tolerance fails every shifted solve
    let out = fraclb()
        .args(["converge", "--s", "0.5", "--levels", "1..1", "--trunc", "50", "--solver", "cg:1e-300"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed: s = 0.5, level 1"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "s = [0.6]\nfirst_level = 1\nlast_level = 2\nmesh = \"ico\"\n").unwrap();
    let out = fraclb()
        .args(["sigma-study", "--levels", "1..3", "--config"])
        .arg(&cfg)
        .env("FRACLB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let levels: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(levels, ["1", "2", "3"]);
    // icosahedron level 1 has 42 vertices
    assert!(text.lines().nth(1).unwrap().starts_with("1,42,"));
}

#[test]
fn solve_exports_vtk_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let status = fraclb()
        .args(["solve", "--s", "0.5", "--levels", "2..2", "--trunc", "200", "--matrices", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    for f in ["solution_s0.5.vtk", "solution_s0.5_trace.csv", "mass.mtx", "stiffness.mtx"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let vtk = std::fs::read_to_string(dir.path().join("solution_s0.5.vtk")).unwrap();
    assert!(vtk.contains("CELL_TYPES 96") && vtk.contains("SCALARS u double 1"));
}
