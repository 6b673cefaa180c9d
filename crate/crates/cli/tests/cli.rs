use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, cmd: &str, config: &str) -> Output {
    let path = dir.join("run.ini");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_magflow")).args([cmd, path.to_str().unwrap()]).current_dir(dir).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap().trim().to_string()
}

#[test]
fn oracle_on_the_sphere() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "oracle", "[surface]\nkind=sphere\n[run]\ns=1.0\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), r#"{"radius":0.78539816,"period":4.44288294}"#);
    let circle = fs::read_to_string(dir.path().join("out/circle.csv")).unwrap();
    assert!(circle.starts_with("angle,u,v\n"));
    assert!(dir.path().join("out/plot.gp").exists());
    assert_eq!(fs::read_to_string(dir.path().join("out/summary.json")).unwrap().trim(), stdout(&out));
}

#[test]
fn critical_values_on_genus_two() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "critical", "[surface]\nkind=hyperbolic\ngenus=2\n[field]\nconstant=1\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), r#"{"c_h":0.5,"homogeneous_c":0.5}"#);
}

#[test]
fn tiny_seed_collapses() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "orbit-descend", "[surface]\nkind=torus\n[run]\nk=0.5\nseed_radius=0.001\n[solver]\nn=64\n");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out), r#"{"outcome":"collapse"}"#);
}

#[test]
fn descent_recovers_the_hyperbolic_circle() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "orbit-descend", "[surface]\nkind=hyperbolic\n[run]\ns=2\n[solver]\nn=512\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["outcome"], "converged");
    let period = v["period"].as_f64().unwrap();
    assert!((period - 4.0 * std::f64::consts::PI / 3f64.sqrt()).abs() < 1e-4, "{period}");
    let rows = fs::read_to_string(dir.path().join("out/loop.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 512 + 1);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let both = run(dir.path(), "oracle", "[surface]\nkind=sphere\n[run]\nk=0.5\ns=1\n");
    assert_eq!(both.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&both.stderr).contains("k"));
    let unknown = run(dir.path(), "simulate", "[surface]\nkind=sphere\nradius=3\n");
    assert_eq!(unknown.status.code(), Some(2));
    let header = run(dir.path(), "simulate", "[surface]\nkind=sphere\n[run\n");
    assert_eq!(header.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&header.stderr).contains("line 3"));
    let domain = run(dir.path(), "oracle", "[surface]\nkind=torus\n[field]\nconstant=2\n[run]\ns=1\n");
    assert_eq!(domain.status.code(), Some(2));
}

#[test]
fn summaries_are_deterministic() {
    let config =
        "[surface]\nkind=torus\n[field]\nterms=1 0 0.3 0; 0 1 0 0.1\nconstant=1\n[run]\ns=1\nseed_x=0.2\nseed_y=0.4\n[solver]\nt_max=20\n";
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for cmd in ["simulate", "contact-check"] {
        let (x, y) = (run(a.path(), cmd, config), run(b.path(), cmd, config));
        assert_eq!(x.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&x.stderr));
        assert_eq!(x.stdout, y.stdout, "{cmd}");
        assert_eq!(fs::read(a.path().join("out/summary.json")).unwrap(), fs::read(b.path().join("out/summary.json")).unwrap());
    }
}

#[test]
fn sweep_runs_every_strength() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "sweep", "[surface]\nkind=sphere\n[run]\nsweep_s=0.5, 1, 2\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for (run, s) in runs.iter().zip([0.5f64, 1.0, 2.0]) {
        let r = run["radius"].as_f64().unwrap();
        assert!((r - (1.0 / s).atan()).abs() < 1e-7, "{r}");
    }
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn taimanov_curve_refines_to_an_orbit() {
    let dir = TempDir::new().unwrap();
    let config = "[surface]\nkind=torus\n[field]\nbase=1\nbumps=0.5 0.5 -2 0.28209479177387814\n\
                  [run]\nk=0.0015\nseed_radius=0.2\nseed_centre_x=0.5\nseed_centre_y=0.5\nseed_clockwise=true\n";
    let out = run(dir.path(), "taimanov", config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["outcome"], "stationary");
    assert!(v["residual"].as_f64().unwrap() < 1e-3);
    let orbit = &v["orbits"][0];
    assert!(orbit["curvature_residual"].as_f64().unwrap() < 1e-6, "{orbit}");
    assert!(dir.path().join("out/orbit_0.csv").exists());
}
