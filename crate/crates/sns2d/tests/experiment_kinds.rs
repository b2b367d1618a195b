//! Drive every experiment kind through the orchestration layer with small
//! parameters, asserting artifacts and check verdicts.

use std::fs;
use std::path::Path;

use sns2d::config::ExperimentSpec;
use sns2d::experiment::run;

fn run_kind(dir: &Path, body: &str) -> sns2d::experiment::RunReport {
    let mut spec = ExperimentSpec::parse(body).unwrap();
    spec.output_dir = dir.join(spec.name.clone());
    run(&spec).unwrap()
}

const COMMON_SIM: &str = "
[sim]
kmax = 2
nu = 1.0
dt = 0.005
horizon = 4.0
seed = 77
ensemble_size = 32
sample_stride = 20

[forcing]
profile = low_shell
amplitude = 0.3

[noise]
class = bounded
m = 8
";

#[test]
fn moments_kind_passes_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "
[experiment]
name = moments_small
kind = moments
{COMMON_SIM}
[init]
u0 = rough:1.0

[moments]
q = 2, 4
"
    );
    let report = run_kind(dir.path(), &body);
    assert!(report.passed(), "{:?}", report.failures);
    let q2 = dir.path().join("moments_small/moments_q2.csv");
    assert!(q2.exists());
    let rows = fs::read_to_string(q2).unwrap();
    assert!(rows.lines().nth(1).unwrap().starts_with("time,mean,se,bound,verdict"));
}

#[test]
fn tails_kind_reports_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "
[experiment]
name = tails_small
kind = tails
{COMMON_SIM}
[init]
u0 = random:1.0

[tails]
r_grid = 0.5, 1, 2
"
    );
    let report = run_kind(dir.path(), &body);
    assert!(report.passed(), "{:?}", report.failures);
    let csv = fs::read_to_string(dir.path().join("tails_small/tails.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 3);
    assert!(csv.contains("pass"));
}

#[test]
fn stop_prob_kind_warns_on_small_beta() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "
[experiment]
name = stop_small
kind = stop_prob
{COMMON_SIM}
[init]
u0 = random:1.0

[nudge]
n = 8

[tau]
monitors = 0.5:0.01, 2:0.01
"
    );
    let report = run_kind(dir.path(), &body);
    assert!(report.passed(), "{:?}", report.failures);
    assert!(
        report.notes.iter().any(|n| n.contains("below the class requirement")),
        "expected a beta warning, got {:?}",
        report.notes
    );
    assert!(dir.path().join("stop_small/stop_prob.csv").exists());
}

#[test]
fn mixing_kind_converges_on_identical_starts() {
    // both ensembles from the same start: the distance sits at the floor,
    // so the calibrated check passes quickly
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "
[experiment]
name = mixing_small
kind = mixing
{COMMON_SIM}
[init]
u0 = random:1.0
v0 = random:1.0

[observables]
modes = 4

[mixing]
times = 0, 2, 4
bootstrap = 60
"
    );
    let report = run_kind(dir.path(), &body);
    assert!(report.passed(), "{:?}", report.failures);
    let csv = fs::read_to_string(dir.path().join("mixing_small/mixing.csv")).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert_eq!(
        header,
        "time,dl_lower_bound,dl_se,w1_energy,w1_enstrophy,w1_mode_1,w1_mode_2,w1_mode_3,w1_mode_4,n_samples"
    );
    assert!(dir.path().join("mixing_small/mixing_floor.csv").exists());
}

#[test]
fn coupling_kind_meets_probability_target() {
    let dir = tempfile::tempdir().unwrap();
    // longer horizon than the other kinds: reaching eps = 1e-3 |u0 - v0|
    // takes several synchronization e-folds
    let body = "
[experiment]
name = coupling_small
kind = coupling_prob

[sim]
kmax = 2
nu = 1.0
dt = 0.005
horizon = 8.0
seed = 77
ensemble_size = 32
sample_stride = 20

[forcing]
profile = low_shell
amplitude = 0.3

[noise]
class = bounded
m = 8

[nudge]
enabled = true
n = 8

[init]
u0 = random:1.0
v0 = opposite

[coupling]
min_p = 0.9
target_times = 2
"
    .to_string();
    let report = run_kind(dir.path(), &body);
    assert!(report.passed(), "{:?}", report.failures);
    let summary =
        fs::read_to_string(dir.path().join("coupling_small/coupling_summary.csv")).unwrap();
    assert!(summary.lines().count() >= 3);
}

#[test]
fn sweep_kind_orders_feedback_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "
[experiment]
name = sweep_small
kind = sweep_n
{COMMON_SIM}
[init]
u0 = random:1.0
v0 = zero

[sweep]
n_values = 4, 8
"
    );
    let report = run_kind(dir.path(), &body);
    assert!(report.passed(), "{:?}", report.failures);
    let csv = fs::read_to_string(dir.path().join("sweep_small/sweep.csv")).unwrap();
    assert!(csv.contains("smallest_decaying_n"));
    assert_eq!(csv.lines().count(), 2 + 2 + 1);
}

#[test]
fn snapshot_times_export_readable_fields() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "
[experiment]
name = snap_small
kind = simulate
{COMMON_SIM}
[init]
u0 = random:1.0

[io]
snapshot_times = 2, 4
"
    );
    let report = run_kind(dir.path(), &body);
    assert!(report.passed());
    let spec = ExperimentSpec::parse(&body).unwrap();
    for t in [2, 4] {
        let path = dir.path().join(format!("snap_small/snapshot_t{t}_u.bin"));
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 8 * spec.sim.basis.total_dim());
        let field =
            sns2d::SpectralField::read_from(&mut bytes.as_slice(), &spec.sim.basis).unwrap();
        assert!(field.norm_h_sq() > 0.0);
    }
}
