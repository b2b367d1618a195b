//! Exceedance statistics of the recentred energy supremum against the
//! exponential-martingale bound `exp(-nu lambda_1 R / (8 K1^2))`.
//!
//! Run with `cargo run --release --example martingale_tails`.

use sns2d::config::{ForcingSpec, InitSpec};
use sns2d::diagnostics::{estimate_tail, EstimateContext};
use sns2d::dynamics::{run_ensemble, SimConfig};
use sns2d::noise::{GrowthClass, NoiseModel};
use sns2d::Basis;

fn main() {
    let basis = Basis::new(3).unwrap();
    let mut cfg = SimConfig::deterministic(&basis, 1.0, 5e-3, 2000);
    cfg.ensemble_size = 128;
    cfg.sample_stride = 20;
    cfg.seed = 6;
    cfg.noise = Some(NoiseModel::new(GrowthClass::Bounded, 0.5, 12, 0, &basis).unwrap());
    cfg.forcing = ForcingSpec::LowShell { modes: 4, amplitude: 0.3 }.build(&basis).unwrap();
    let u0 = InitSpec::Random { norm: 1.0 }.build(&basis, cfg.seed, 1, None).unwrap();

    let logs = run_ensemble(&cfg, &u0, None).unwrap();
    let ctx = EstimateContext::new(&cfg, &u0);
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    let est = estimate_tail(&logs, &grid, &ctx).unwrap();

    println!("    R    empirical P(sup >= R)   Wilson radius   bound");
    for i in 0..grid.len() {
        println!(
            "{:5.2}   {:.4}                  {:.4}          {:.4}",
            est.thresholds[i],
            est.probability[i],
            est.radius[i],
            est.bound[i].unwrap()
        );
    }
    println!(
        "{} trajectories; bound respected at every threshold: {}",
        cfg.ensemble_size,
        if est.ok { "yes" } else { "NO" }
    );
}
