use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("meshctrl-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn meshctrl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_meshctrl")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.conf");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = scratch("bad");
    let cfg = write_config(&dir, "case = 3\n");
    let out = meshctrl(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("case"));

    let cfg = write_config(&dir, "samples = many\n");
    assert_eq!(meshctrl(&["run", "--config", &cfg]).status.code(), Some(2));

    let missing = dir.join("absent.conf");
    assert_eq!(meshctrl(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn converge_needs_three_levels() {
    let dir = scratch("short");
    let cfg = write_config(&dir, "N_list = 5, 9\n");
    let out = meshctrl(&["converge", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_iteration_run_echoes_initial_control() {
    let dir = scratch("zero");
    let cfg = write_config(&dir, "N = 6\nsamples = 200\npilot_paths = 200\nmax_iters = 0\n");
    let out_dir = dir.join("out");
    let out = meshctrl(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let control = fs::read_to_string(out_dir.join("control.csv")).unwrap();
    let mut lines = control.lines();
    assert_eq!(lines.next(), Some("t,u_num,u_exact"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let u: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(u, 0.0);
    }
    let iters = fs::read_to_string(out_dir.join("iters.csv")).unwrap();
    assert_eq!(iters.trim_end(), "iter,cost,grad_norm,control_change,wall_ms");
}

#[test]
fn interp_bench_writes_table() {
    let dir = scratch("interp");
    let cfg = write_config(&dir, "interp.counts = 16, 64, 256\ninterp.backends = shepard\ninterp.probes = 10\n");
    let out = meshctrl(&["interp-bench", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(dir.join("interp.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("backend,h,max_err,rate"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn usage_error_is_not_success() {
    let out = meshctrl(&["frobnicate"]);
    assert!(!out.status.success());
}
