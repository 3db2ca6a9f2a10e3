use std::process::Command;

use barrier_homotopy::history::read_param_history;
use barrier_homotopy::vtk::read_density_vtk;

fn bhtopo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bhtopo"))
}

#[test]
fn solve_outputs_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.cfg");
    std::fs::write(&cfg, "mesh.nx = 20\nmesh.ny = 8\noutput.snapshots = 0, 0.5\n").unwrap();
    let out = dir.path().join("out");
    let status = bhtopo()
        .arg("solve")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let rows = read_param_history(&out.join("param_history.csv")).unwrap();
    assert!(!rows.is_empty());
    assert_eq!(rows.last().unwrap().t, 1.0);
    assert_eq!(rows.last().unwrap().mu, 0.001);

    let start = read_density_vtk(&out.join("rho_t0.000000.vtk")).unwrap();
    assert!(start.rho.iter().all(|&r| r == 0.5));
    let last = read_density_vtk(&out.join("rho_final.vtk")).unwrap();
    assert_eq!(last.points.len(), 21 * 9);
    assert_eq!(last.triangles.len(), 2 * 20 * 8);
    assert!(last.rho.iter().all(|&r| r > 0.0 && r < 1.0));
    assert!(last.title.contains("nx=20 ny=8 t=1.0"));
    let snaps = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("rho_t"))
        .count();
    assert_eq!(snaps, 2);
}

#[test]
fn invalid_config_reports_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "problem.gamma = -1\n").unwrap();
    let out = bhtopo().arg("solve").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.gamma"));
}

#[test]
fn usage_errors_exit_with_two() {
    let out = bhtopo().arg("solve").arg("--predictor").arg("3").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn derivative_check_passes_on_coarse_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.cfg");
    std::fs::write(&cfg, "mesh.nx = 20\nmesh.ny = 8\n").unwrap();
    let out = bhtopo()
        .args(["check-derivatives", "--points", "2"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
