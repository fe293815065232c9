//! End-to-end checks of the binary: exit codes, file layout, determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stomax(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stomax"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// Small, fast configuration: 8^3 grid, order 6, a handful of steps.
const TINY_ENERGY: &str = r#"
experiment = "energy"
grid_level = 3
gamma = 6
lambda_list = [0.0, 0.5]
dt = 0.0125
t_final = 0.05
noise_modes = 4
write_snapshot = true
dump_noise = true
"#;

#[test]
fn basis_dump_writes_theta_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stomax(&["basis-dump", "--gamma", "10", "--out", "basis"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("basis/theta_prime_gamma10.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("k,theta_prime"));
    // k in [-(gamma-2), gamma-2] -> 17 rows
    assert_eq!(lines.count(), 17);
    assert!(table.contains("\n0,0\n"), "theta'(0) must be exactly zero");
}

#[test]
fn basis_dump_rejects_odd_gamma() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stomax(&["basis-dump", "--gamma", "7"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stomax(&["run", "--config", "nope.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stomax(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_content_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "experiment = \"energy\"\ndt = -1.0\n");
    let out = stomax(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
}

#[test]
fn kind_mismatch_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "energy.toml", "experiment = \"energy\"");
    let out = stomax(&["converge", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn energy_run_writes_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "energy.toml", TINY_ENERGY);
    let out = stomax(&["run", "--config", &cfg, "--out", "results"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let results = tmp.path().join("results");
    for name in [
        "manifest.toml",
        "config_echo.toml",
        "trajectory_lambda_0.csv",
        "trajectory_lambda_0p5.csv",
        "energy.svg",
        "residual.svg",
        "final_state_lambda_0.bin",
        "noise_path.csv",
    ] {
        assert!(results.join(name).exists(), "missing {name}");
    }
    let manifest = fs::read_to_string(results.join("manifest.toml")).unwrap();
    assert!(manifest.contains("experiment = \"energy\""));
    assert!(manifest.contains("seed = 42"));
    let snapshot = fs::read(results.join("final_state_lambda_0.bin")).unwrap();
    assert_eq!(&snapshot[..8], b"SMAXSNP1");
    let traj = fs::read_to_string(results.join("trajectory_lambda_0.csv")).unwrap();
    assert!(traj.starts_with("n,t,energy,err,iters\n"));
    assert_eq!(traj.lines().count(), 1 + 5); // header + 4 steps + baseline row
}

#[test]
fn seed_override_changes_manifest_and_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "energy.toml", TINY_ENERGY);
    let out = stomax(
        &["run", "--config", &cfg, "--out", "seeded", "--seed", "7"],
        tmp.path(),
    );
    assert!(out.status.success());
    let manifest = fs::read_to_string(tmp.path().join("seeded/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 7"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "energy.toml", TINY_ENERGY);
    for dir in ["a", "b"] {
        let out = stomax(
            &["run", "--config", &cfg, "--out", dir, "--threads", "2"],
            tmp.path(),
        );
        assert!(out.status.success());
    }
    for name in [
        "manifest.toml",
        "trajectory_lambda_0p5.csv",
        "energy.svg",
        "noise_path.csv",
    ] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn tiny_det_convergence_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "det.toml",
        r#"
experiment = "det-converge"
grid_level = 3
gamma = 6
t_final = 0.125
dt_list = [0.03125, 0.015625]
dt_reference = 0.001953125
"#,
    );
    let out = stomax(&["converge", "--config", &cfg, "--out", "conv"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("conv/deterministic_orders.csv")).unwrap();
    assert!(table.starts_with("dt,error,order\n"));
    assert!(table.lines().nth(1).unwrap().ends_with(",-"));
    assert!(table.contains("# fitted_slope,"));
    assert!(tmp.path().join("conv/convergence.svg").exists());
}

#[test]
fn tiny_ensemble_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ens.toml",
        r#"
experiment = "ensemble"
grid_level = 3
gamma = 6
lambda = 0.5
dt = 0.0125
t_final = 0.05
trajectories = 3
noise_modes = 4
histogram_bins = 8
"#,
    );
    let out = stomax(&["ensemble", "--config", &cfg, "--out", "ens"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "ensemble_energy.csv",
        "max_energy_histogram.csv",
        "ensemble_energy.svg",
        "max_energy_histogram.svg",
    ] {
        assert!(tmp.path().join("ens").join(name).exists(), "missing {name}");
    }
    let csv = fs::read_to_string(tmp.path().join("ens/ensemble_energy.csv")).unwrap();
    assert!(csv.starts_with("t,mean,min,max\n"));
}
