use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pint_cli::report::{read_csv, CSV_HEADER};

fn pint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pint")).args(args).output().expect("run pint")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_minimal_case1_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem.example = ex1_case1\nproblem.M = 16\nproblem.n = 31\n");
    let out = dir.path().join("report.json");
    let run = pint(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(&out);
    assert_eq!(report["report"]["converged"], true);
    assert!(report["report"]["error_inf"].as_f64().unwrap() < 5e-3);
    assert_eq!(report["M"], 16);
}

#[test]
fn solve_rejects_theta_below_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem.example = ex1_case1\nproblem.M = 8\nproblem.n = 7\nproblem.theta = 0.3\n",
    );
    let run = pint(&["solve", "--config", &cfg]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("theta ∈ [1/2, 1]"));
}

#[test]
fn solve_echoes_omega_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nexample = ex2\nM = 8\nn = 15\n");
    let out = dir.path().join("report.json");
    let run = pint(&["solve", "--config", &cfg, "--omega", "1.0", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(json(&out)["omega"].as_f64(), Some(1.0));
}

#[test]
fn solve_non_convergence_exits_two_and_keeps_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem.example = ex1_case1\nproblem.M = 16\nproblem.n = 15\nsolver.method = gmres\ngmres.restart = 5\ngmres.maxit = 2\n",
    );
    let out = dir.path().join("report.json");
    let run = pint(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(json(&out)["report"]["converged"], false);
}

#[test]
fn config_errors_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem.example = ex1_case1\nproblem.M = -3\nproblem.n = 7\n");
    let run = pint(&["solve", "--config", &cfg]);
    assert_eq!(run.status.code(), Some(1));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("line 2") && err.contains("problem.M"), "{err}");
    let run = pint(&["solve", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn bench_writes_round_trippable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let run = pint(&[
        "bench", "--example", "ex2", "--alphas", "1.4,1.5", "--M", "8,16", "--n", "7", "--method", "both", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.converged && r.alpha1 == Some(1.4) && r.alpha2 == Some(1.5)));
    let pg: Vec<_> = rows.iter().filter(|r| r.method == "pgmres").collect();
    let plain: Vec<_> = rows.iter().filter(|r| r.method == "gmres").collect();
    assert!(pg.iter().all(|r| r.omega.is_some()) && plain.iter().all(|r| r.omega.is_none()));
}

#[test]
fn bench_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let run = pint(&["bench", "--example", "ex1_case2", "--M", "8,16", "--n", "15", "--out", out.to_str().unwrap()]);
        assert_eq!(run.status.code(), Some(0));
        runs.push(read_csv(fs::File::open(out).unwrap()).unwrap());
    }
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert_eq!(a.iters, b.iters);
        assert_eq!(a.error_inf.map(f64::to_bits), b.error_inf.map(f64::to_bits));
    }
}

#[test]
fn bench_rejects_alphas_outside_range_and_for_laplacian() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let out = out.to_str().unwrap();
    let run = pint(&["bench", "--example", "ex2", "--alphas", "0.9,1.5", "--M", "8", "--n", "7", "--out", out]);
    assert_eq!(run.status.code(), Some(1));
    let run = pint(&["bench", "--example", "ex1_case1", "--alphas", "1.1,1.2", "--M", "8", "--n", "7", "--out", out]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn verify_kernels_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let run = pint(&["verify", "--suite", "kernels", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let reports = json(&out);
    let reports = reports.as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["pass"] == true));
    for name in ["dst_involution_isometry", "iltt_inverse", "toeplitz_fft_vs_dense"] {
        assert!(reports.iter().any(|r| r["check"] == name), "{name}");
    }
}

#[test]
fn verify_theorems_passes() {
    let run = pint(&["verify", "--suite", "theorems"]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let reports = reports.as_array().unwrap();
    assert!(reports.iter().any(|r| r["check"].as_str().unwrap().starts_with("condition_bound")));
    assert!(reports.iter().any(|r| r["check"].as_str().unwrap().starts_with("residual_relation")));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(pint(&["verify", "--suite", "everything"]).status.code(), Some(1));
    assert_eq!(pint(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pint(&["--help"]).status.code(), Some(0));
}
