//! Drive a whole experiment from one of the shipped config files, exactly
//! as the `sns2d run` binary would, and list the artifacts.
//!
//! Run with `cargo run --release --example run_experiment` (uses
//! `configs/foias_bounded.ini`).

use sns2d::config::ExperimentSpec;
use sns2d::experiment;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/foias_bounded.ini");
    let text = std::fs::read_to_string(path).expect("shipped config exists");
    let spec = ExperimentSpec::parse(&text).expect("config is valid");
    println!("experiment '{}' ({}), hash {}", spec.name, spec.kind.name(), spec.config_hash());

    match experiment::run(&spec) {
        Ok(report) => {
            for artifact in &report.artifacts {
                println!("wrote {}", artifact.display());
            }
            for note in &report.notes {
                println!("note: {note}");
            }
            if report.passed() {
                println!("all checks passed");
            } else {
                for failure in &report.failures {
                    println!("check failed: {failure}");
                }
            }
        }
        Err(e) => println!("run error: {e} (exit code {})", e.exit_code()),
    }
}
