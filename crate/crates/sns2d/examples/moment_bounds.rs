//! Mean-energy estimate: the ensemble average of
//! `|u(t)|^2 + a int |u|_V^2` stays below `|u_0|^2 + b t` with the class
//! constants computed from the truncation.
//!
//! Run with `cargo run --release --example moment_bounds`.

use sns2d::config::{ForcingSpec, InitSpec};
use sns2d::diagnostics::{check_energy_moment, EstimateContext};
use sns2d::dynamics::{run_ensemble, SimConfig};
use sns2d::noise::{GrowthClass, NoiseModel};
use sns2d::Basis;

fn main() {
    let basis = Basis::new(3).unwrap();
    let mut cfg = SimConfig::deterministic(&basis, 1.0, 5e-3, 2000);
    cfg.ensemble_size = 48;
    cfg.sample_stride = 50;
    cfg.seed = 4;
    cfg.noise = Some(NoiseModel::new(GrowthClass::Bounded, 0.5, 12, 0, &basis).unwrap());
    cfg.forcing = ForcingSpec::LowShell { modes: 4, amplitude: 0.3 }.build(&basis).unwrap();
    let u0 = InitSpec::Rough { norm: 1.0 }.build(&basis, cfg.seed, 1, None).unwrap();

    let logs = run_ensemble(&cfg, &u0, None).unwrap();
    let ctx = EstimateContext::new(&cfg, &u0);
    let report = check_energy_moment(&logs, 4.0, &ctx).unwrap();
    let c = report.constants.unwrap();
    println!("constants: a = {:.4}, b = {:.4} (bounded class)", c.a, c.b);
    println!("   t     mean[|u|^2 + a int |u|_V^2]    bound |u0|^2 + b t");
    for row in report.rows.iter().step_by(5) {
        println!(
            "{:5.2}   {:.6}                     {:.6}   {}",
            row.time,
            row.mean,
            row.bound,
            if row.ok { "ok" } else { "VIOLATED" }
        );
    }
    println!(
        "mean bound: {}; 4th moment of |u|_H late/early supremum: {:.4}/{:.4} ({})",
        if report.mean_bound_ok { "holds at all sample times" } else { "VIOLATED" },
        report.u_moment.0,
        report.u_moment.1,
        if report.u_moment.2 { "no late growth" } else { "GROWING" }
    );
}
