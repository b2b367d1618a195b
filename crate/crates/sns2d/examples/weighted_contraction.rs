//! Two solutions driven by the same noise without any feedback: the
//! exponentially weighted squared difference
//! `exp(-(L_G^2 t - lambda_1 nu t + (1/nu) int |u|_V^2)) |u - v|_H^2`
//! never exceeds the initial separation in the mean.
//!
//! Run with `cargo run --release --example weighted_contraction`.

use sns2d::config::{ForcingSpec, InitSpec};
use sns2d::diagnostics::{check_weighted_contraction, EstimateContext};
use sns2d::dynamics::{run_ensemble, SimConfig};
use sns2d::noise::{GrowthClass, NoiseModel};
use sns2d::{Basis, SpectralField};

fn main() {
    let basis = Basis::new(3).unwrap();
    let mut cfg = SimConfig::deterministic(&basis, 1.0, 5e-3, 1200);
    cfg.ensemble_size = 48;
    cfg.sample_stride = 30;
    cfg.seed = 5;
    cfg.noise = Some(NoiseModel::new(GrowthClass::Bounded, 0.5, 12, 0, &basis).unwrap());
    cfg.forcing = ForcingSpec::LowShell { modes: 4, amplitude: 0.3 }.build(&basis).unwrap();
    let x = InitSpec::Random { norm: 1.0 }.build(&basis, cfg.seed, 1, None).unwrap();
    let y = SpectralField::zeros(&basis);

    let logs = run_ensemble(&cfg, &x, Some(&y)).unwrap();
    let ctx = EstimateContext::new(&cfg, &x);
    let report = check_weighted_contraction(&logs, &ctx).unwrap();
    println!("|x - y|_H^2 = {}", report.rows[0].bound);
    println!("   t     weighted mean   se");
    for row in report.rows.iter().step_by(4) {
        println!("{:5.2}   {:.6}       {:.1e}", row.time, row.mean, row.se);
    }
    println!(
        "max (mean - 2SE - bound) over the horizon: {:+.3e}  ({})",
        report.max_violation_2se,
        if report.ok { "contraction holds" } else { "VIOLATED" }
    );
}
