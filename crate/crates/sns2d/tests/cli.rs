//! End-to-end tests of the `sns2d` binary: exit-code contract, CSV
//! determinism, the single-mode scheme oracle and checkpoint resume.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sns2d(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sns2d"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SINGLE_MODE: &str = "
[experiment]
name = single_mode
kind = simulate
output_dir = out

[sim]
kmax = 2
nu = 1.0
dt = 0.001
horizon = 1.0
sample_stride = 10

[init]
u0 = single:1:1.0
";

#[test]
fn simulate_energy_column_matches_scheme_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "single.ini", SINGLE_MODE);
    let out = sns2d(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("out/trajectory_0.csv")).unwrap();
    let mut checked = 0;
    for line in csv.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        let t: f64 = cols[0].parse().unwrap();
        let energy: f64 = cols[1].parse().unwrap();
        let n = (t / 0.001).round() as i32;
        let expect = (1.0f64 + 1.0 * 0.001).powi(-2 * n);
        assert!(
            (energy - expect).abs() <= 1e-12 * expect,
            "t = {t}: {energy} vs {expect}"
        );
        checked += 1;
    }
    assert_eq!(checked, 101);
}

#[test]
fn reruns_write_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let body = "
[experiment]
kind = simulate
output_dir = out

[sim]
kmax = 2
nu = 0.5
dt = 0.01
horizon = 0.5
seed = 5

[noise]
class = sublinear

[init]
u0 = random:1.0
";
    let cfg = write_config(dir.path(), "run.ini", body);
    assert!(sns2d(&["run", &cfg], dir.path()).status.success());
    let first = fs::read(dir.path().join("out/trajectory_0.csv")).unwrap();
    assert!(sns2d(&["run", &cfg], dir.path()).status.success());
    let second = fs::read(dir.path().join("out/trajectory_0.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn foias_acceptance_config_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/foias_bounded.ini");
    let out = sns2d(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("out/foias_bounded/decay.csv").exists());
    assert!(dir.path().join("out/foias_bounded/fit.csv").exists());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // 4: config error (unknown key)
    let bad = write_config(dir.path(), "bad.ini", &format!("{SINGLE_MODE}\nnot_a_key = 1\n"));
    let out = sns2d(&["run", &bad], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    // 4: precondition violation with the inequality in the message
    let body = "
[experiment]
kind = foias_prodi
output_dir = out

[sim]
kmax = 2
nu = 1.0
dt = 0.01
horizon = 1.0
ensemble_size = 2

[noise]
class = bounded
m = 4

[nudge]
enabled = true
n = 10

[init]
v0 = random:1.0
";
    let cfg = write_config(dir.path(), "precond.ini", body);
    let out = sns2d(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nudge.n = 10 > noise.m = 4"), "{stderr}");

    // 2: a declared check fails (unreachable decay requirement)
    let body = "
[experiment]
kind = foias_prodi
output_dir = out2

[sim]
kmax = 2
nu = 1.0
dt = 0.01
horizon = 1.0
ensemble_size = 4
sample_stride = 5

[noise]
class = bounded

[nudge]
enabled = true
n = 4

[init]
u0 = random:1.0
v0 = zero

[fit]
min_drop = 1e9
";
    let cfg = write_config(dir.path(), "fail.ini", body);
    let out = sns2d(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out2/failures.csv").exists());

    // 3: blowup
    let body = "
[experiment]
kind = simulate
output_dir = out3

[sim]
kmax = 1
nu = 0.1
dt = 0.01
horizon = 5.0
blowup_ceiling = 1.0

[forcing]
profile = single
index = 1
amplitude = 50.0
";
    let cfg = write_config(dir.path(), "blowup.ini", body);
    let out = sns2d(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("blew up"), "{stderr}");
}

#[test]
fn validate_echo_is_closed_under_parsing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.ini", SINGLE_MODE);
    let out = sns2d(&["validate", &cfg], dir.path());
    assert!(out.status.success());
    let echoed = String::from_utf8(out.stdout).unwrap();
    // feeding the echo back through validate reproduces it
    let echo_path = write_config(dir.path(), "echo.ini", &echoed);
    let out2 = sns2d(&["validate", &echo_path], dir.path());
    assert!(out2.status.success());
    assert_eq!(echoed, String::from_utf8(out2.stdout).unwrap());
}

#[test]
fn checkpoint_resume_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let body = "
[experiment]
kind = simulate
output_dir = out

[sim]
kmax = 2
nu = 1.0
dt = 0.01
horizon = 1.0
seed = 17
sample_stride = 10

[noise]
class = bounded

[init]
u0 = random:1.0

[io]
checkpoint_t = 0.5
";
    let cfg = write_config(dir.path(), "ck.ini", body);
    assert!(sns2d(&["run", &cfg], dir.path()).status.success());
    let full = fs::read_to_string(dir.path().join("out/trajectory_0.csv")).unwrap();
    let out = sns2d(&["resume", "out/checkpoint.bin"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resumed = fs::read_to_string(dir.path().join("out/trajectory_0_resumed.csv")).unwrap();
    // the resumed rows coincide bitwise with the tail of the full run:
    // samples at t = 0.5, 0.6, ..., 1.0
    let full_rows: Vec<&str> = full.lines().skip(2).collect();
    let resumed_rows: Vec<&str> = resumed.lines().skip(2).collect();
    assert_eq!(resumed_rows.len(), 6);
    let offset = full_rows.len() - resumed_rows.len();
    for (i, row) in resumed_rows.iter().enumerate() {
        assert_eq!(*row, full_rows[offset + i], "row {i} differs");
    }
}

#[test]
fn usage_and_unknown_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = sns2d(&[], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let out = sns2d(&["frobnicate", "x"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let out = sns2d(&["run", "does_not_exist.ini"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
