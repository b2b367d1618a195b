//! Noise-free dissipativity of the semi-implicit step: along any forced
//! trajectory, `|u(t)|^2 + 2 nu int |u|_V^2 <= |u_0|^2 + 2 int <f, u>` holds
//! at every grid point (right-endpoint quadrature).
//!
//! Run with `cargo run --example energy_balance`.

use sns2d::config::{ForcingSpec, InitSpec};
use sns2d::diagnostics::deterministic_energy_report;
use sns2d::dynamics::SimConfig;
use sns2d::Basis;

fn main() {
    let basis = Basis::new(4).unwrap();
    let mut cfg = SimConfig::deterministic(&basis, 1.0, 1e-3, 1500);
    cfg.forcing = ForcingSpec::LowShell { modes: 4, amplitude: 0.3 }.build(&basis).unwrap();
    let u0 = InitSpec::Rough { norm: 1.0 }.build(&basis, 7, 1, None).unwrap();

    let report = deterministic_energy_report(&cfg, &u0, 1e-10).unwrap();
    println!("   t        lhs (energy + dissipation)   rhs (initial + work)");
    for i in (0..report.times.len()).step_by(250) {
        println!(
            "{:6.3}    {:.12}              {:.12}",
            report.times[i], report.lhs[i], report.rhs[i]
        );
    }
    println!(
        "max relative violation over {} steps: {:.3e}  ({})",
        report.times.len() - 1,
        report.max_rel_violation,
        if report.ok { "inequality holds" } else { "VIOLATED" }
    );
}
