//! Checkpoint a stochastic run halfway, resume it, and verify the resumed
//! samples coincide bitwise with an uninterrupted reference.
//!
//! Run with `cargo run --example checkpoint_resume`.

use sns2d::config::ExperimentSpec;
use sns2d::dynamics::{run_trajectory, run_trajectory_from};
use sns2d::experiment::{read_checkpoint, write_checkpoint};

const CONFIG: &str = "
[experiment]
kind = simulate
output_dir = out/checkpoint_demo

[sim]
kmax = 2
nu = 1.0
dt = 0.01
horizon = 2.0
seed = 23
sample_stride = 20

[noise]
class = bounded

[init]
u0 = random:1.0
";

fn main() {
    let spec = ExperimentSpec::parse(CONFIG).unwrap();
    let reference = run_trajectory(&spec.sim, &spec.u0, None, 0, 0, &[]).unwrap();

    // capture a checkpoint at t = 1.0
    let ckpt_step = 100;
    let dir = std::env::temp_dir().join("sns2d_checkpoint_demo");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("demo.bin");
    let start = sns2d::dynamics::PairState::new(spec.u0.clone(), None, 0);
    let mut captured = None;
    let _ = run_trajectory_from(&spec.sim, start, 0, 0, None, &[], |state, pos| {
        if state.step == ckpt_step {
            captured = Some((state.clone(), pos));
        }
    })
    .unwrap();
    let (state, pos) = captured.unwrap();
    write_checkpoint(&path, &spec.resolved_ini(), &state, 0, 0, pos).unwrap();
    println!("checkpoint written at t = {} ({} bytes)", 1.0, std::fs::metadata(&path).unwrap().len());

    // resume and compare against the uninterrupted run
    let resume = read_checkpoint(&path).unwrap();
    let resumed = run_trajectory_from(
        &resume.spec.sim,
        resume.state,
        0,
        0,
        Some(resume.word_pos),
        &[],
        |_, _| {},
    )
    .unwrap();
    let offset = reference.sample_index_at(1.0).unwrap();
    let mut all_equal = true;
    for (i, t) in resumed.times.iter().enumerate() {
        let same = resumed.u_h2[i].to_bits() == reference.u_h2[offset + i].to_bits();
        all_equal &= same;
        println!(
            "t = {t:4.2}: resumed |u|_H^2 = {:.12}, reference = {:.12} ({})",
            resumed.u_h2[i],
            reference.u_h2[offset + i],
            if same { "bitwise equal" } else { "DIFFERS" }
        );
    }
    println!(
        "resume reproduces the uninterrupted run: {}",
        if all_equal { "yes" } else { "NO" }
    );
    let _ = std::fs::remove_file(&path);
}
