use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regafem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regafem")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = regafem(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
    }
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("l_shape.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["params"]["theta"] = 1.5.into();
    v["initial_mesh"] = 0.into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = regafem(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("theta"), "{err}");
    assert!(err.contains("initial_mesh"), "{err}");

    let out = regafem(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("o").exists());

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(regafem(&["validate", "--config", garbage.to_str().unwrap()]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(regafem(&["validate", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn jmax0_run_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = regafem(&["run", "--config", &config("jmax0.json"), "--out", out_dir.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("run.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert!(lines[0].starts_with("j,k,tau,r,dofs"));
    assert!(lines[1].contains("INTERFACE"));
    for name in ["mesh.vtk", "solution.vtk", "summary.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["gal_calls"], 1);
    // the initial radius reaches the boundary on the L-shape
    assert!(!summary["warnings"].as_array().unwrap().is_empty());
    let vtk = std::fs::read_to_string(out_dir.join("solution.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(vtk.contains("POINT_DATA"));

    // a second deterministic run is byte-identical
    let again = dir.path().join("again");
    let out = regafem(&["run", "--config", &config("jmax0.json"), "--out", again.to_str().unwrap(), "--deterministic"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(again.join("run.csv")).unwrap(), csv.as_bytes());
}

fn write_rows(path: &Path, points: &[(usize, f64)]) {
    let mut s = String::from("j,k,tau,r,dofs,cells,estimator_total,estimator_jump,estimator_data,energy_error,branch,wall_ms\n");
    for (j, &(dofs, err)) in points.iter().enumerate() {
        s.push_str(&format!("{j},0,1e-1,1e-2,{dofs},{},1e0,1e0,0e0,{err:.16e},MARK,0e0\n", 2 * dofs));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn slopes_fits_the_last_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let pts: Vec<(usize, f64)> = (0..7).map(|k| (100 * 4usize.pow(k), 0.5f64.powi(k as i32))).collect();
    write_rows(&path, &pts);
    let out = regafem(&["slopes", "--csv", path.to_str().unwrap(), "--last", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let s: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((s + 0.5).abs() < 1e-6);

    let out = regafem(&["slopes", "--csv", path.to_str().unwrap(), "--last", "9"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert_eq!(regafem(&["slopes", "--csv", path.to_str().unwrap()]).status.code(), Some(1));
}
