use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use higgslab::cli::{run_cli, EXIT_OK, EXIT_SOLVER, EXIT_USAGE};
use higgslab::config::RunConfig;

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let full: Vec<&str> = std::iter::once("higgslab").chain(args.iter().copied()).collect();
    let code = run_cli(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn solve_into(name: &str, dir: &Path) -> i32 {
    cli(&["solve", &config(name), "--out", dir.to_str().unwrap()]).0
}

#[test]
fn lie_check_exit_codes() {
    let (code, out, _) = cli(&["lie-check", "--n", "3"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("ok") && !out.contains("FAIL"));
    let (code, _, err) = cli(&["lie-check", "--n", "1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("rank"), "{err}");
    let start = Instant::now();
    assert_eq!(cli(&["lie-check", "--n", "8"]).0, EXIT_OK);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cli(&["solve"]).0, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(cli(&["solve", "/nonexistent/config.toml"]).0, EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[group]\nn = 2\n[surface]\nkind = \"torus\"\nN = 16\nspeed = 3\n").unwrap();
    let (code, _, err) = cli(&["solve", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("speed"), "{err}");
    assert_eq!(cli(&["solve", &config("torus_n2_q2"), "--method", "magic"]).0, EXIT_USAGE);
}

#[test]
fn obstructed_run_exits_three_and_records_outcome() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into("torus_fuchsian", dir.path()), EXIT_SOLVER);
    let solve: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["status"], "obstructed");
    assert_eq!(solve["format"], "higgslab-solve");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn solve_writes_self_describing_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into("torus_n3_cyclic", dir.path()), EXIT_OK);
    for f in ["config.toml", "solve.json", "timing.json", "phi.fld", "metric.fld", "report.json", "geometry.csv", "K.fld", "Bnormsq.fld"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let echo = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(echo.starts_with("# format = higgslab-config v1"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "higgslab-report");
    assert_eq!(report["entropy"]["bound"], 0.0);
    assert!(report["geometry"]["detg"]["min"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("geometry.csv")).unwrap();
    assert!(csv.starts_with("# format = higgslab-geometry v1\nx,y,K,Sec,Bnormsq,detg\n"));
}

#[test]
fn report_reproduces_stored_json() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into("torus_n2_q2", dir.path()), EXIT_OK);
    let (code, out, _) = cli(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.as_bytes(), std::fs::read(dir.path().join("report.json")).unwrap());

    let again = dir.path().join("again");
    assert_eq!(cli(&["report", dir.path().to_str().unwrap(), "--out", again.to_str().unwrap()]).0, EXIT_OK);
    for f in ["report.json", "geometry.csv", "K.fld"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn report_with_kappa_rescales_curvatures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into("patch_n3_linear", dir.path()), EXIT_OK);
    let d = dir.path().to_str().unwrap();
    let parse = |s: &str| -> serde_json::Value { serde_json::from_str(s).unwrap() };
    let base = parse(&cli(&["report", d]).1);
    let scaled = parse(&cli(&["report", d, "--kappa", "4"]).1);
    for key in ["k_induced", "sec_ambient", "b_norm_sq"] {
        for end in ["min", "max"] {
            let a = base["geometry"][key][end].as_f64().unwrap();
            let b = scaled["geometry"][key][end].as_f64().unwrap();
            assert!((b - a / 4.0).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-15, "{key}.{end}: {a} vs {b}");
        }
    }
    let e0 = base["geometry"]["total_energy"].as_f64().unwrap();
    let e1 = scaled["geometry"]["total_energy"].as_f64().unwrap();
    assert!((e1 - 4.0 * e0).abs() < 1e-12 * e1);
    let b0 = base["entropy"]["bound"].as_f64().unwrap();
    let b1 = scaled["entropy"]["bound"].as_f64().unwrap();
    assert!((b1 - b0 / 2.0).abs() < 1e-12);
}

#[test]
fn tampered_snapshot_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into("torus_n2_q2", dir.path()), EXIT_OK);
    let metric = dir.path().join("metric.fld");
    let bytes = std::fs::read(&metric).unwrap();
    std::fs::write(&metric, &bytes[..bytes.len() - 7]).unwrap();
    let (code, _, err) = cli(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("7 missing"), "{err}");

    std::fs::write(&metric, &bytes).unwrap();
    let phi = dir.path().join("phi.fld");
    let mut bytes = std::fs::read(&phi).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    std::fs::write(&phi, &bytes).unwrap();
    assert_eq!(cli(&["report", dir.path().to_str().unwrap()]).0, EXIT_USAGE);
    assert_eq!(cli(&["report", "/nonexistent/run"]).0, EXIT_USAGE);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, _) = cli(&["solve", &config("patch_n2_linear"), "--out", d, "--tol", "1e-6", "--kappa", "2"]);
    assert_eq!(code, EXIT_OK);
    let echo = RunConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echo.solver.tol, 1e-6);
    assert_eq!(echo.metric.kappa, 2.0);
    assert_eq!(cli(&["solve", &config("patch_n2_linear"), "--out", d, "--kappa", "-1"]).0, EXIT_USAGE);
}

#[test]
fn sweep_marks_rows_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let base = tempfile::tempdir().unwrap();
    let cfg: PathBuf = base.path().join("sweep.toml");
    let text = std::fs::read_to_string(config("sweep_n3")).unwrap().replace("N = 128", "N = 32");
    std::fs::write(&cfg, text).unwrap();
    let (code, out, _) = cli(&["sweep", cfg.to_str().unwrap(), "--t", "0,2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{out}");
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("# format = higgslab-sweep"));
    assert!(lines[2].starts_with("0,converged"));
    assert!(lines[3].starts_with("2,converged"));

    let torus = base.path().join("torus.toml");
    std::fs::write(&torus, std::fs::read_to_string(config("torus_n3_cyclic")).unwrap()).unwrap();
    let (code, out, _) = cli(&["sweep", torus.to_str().unwrap(), "--t", "0,1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_SOLVER, "{out}");
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().starts_with("0,obstructed"), "{csv}");
    assert!(csv.lines().nth(3).unwrap().starts_with("1,converged"), "{csv}");
}

#[test]
fn oracle_prints_constant_solution() {
    let (code, out, _) = cli(&["oracle", "--n", "2", "--c", "2"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["residual_sup"], 0.0);
    assert_eq!(v["hopf_constant"], -1.0);
    assert_eq!(v["u"][0], 0.0);
    let (code, out, _) = cli(&["oracle", "--n", "3", "--c", "1"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["residual_sup"].as_f64().unwrap() < 1e-13);
    assert!(v["detg"].as_f64().unwrap() > 0.0);
    assert_eq!(cli(&["oracle", "--n", "3", "--c", "0"]).0, EXIT_USAGE);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_higgslab");
    let status = Command::new(bin).args(["lie-check", "--n", "4"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    let status = Command::new(bin).args(["lie-check", "--n", "9"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["solve", &config("torus_fuchsian"), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_SOLVER));
}
