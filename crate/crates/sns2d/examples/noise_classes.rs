//! The three growth classes of the diagonal multiplicative covariance and
//! their derived constants over the truncation.
//!
//! Run with `cargo run --example noise_classes`.

use sns2d::noise::{ClassBound, GrowthClass, NoiseModel};
use sns2d::{Basis, SpectralField};

fn main() {
    let basis = Basis::new(3).unwrap();
    println!(
        "truncation: {} modes; amplitude tail sum S -> pi^2/6 - 1 = {:.6} as kmax grows",
        basis.total_dim(),
        std::f64::consts::PI.powi(2) / 6.0 - 1.0
    );
    println!();

    for class in [GrowthClass::Bounded, GrowthClass::Sublinear, GrowthClass::Linear] {
        let model = NoiseModel::new(class, 0.5, 8, 0, &basis).unwrap();
        let c = model.growth_constants();
        print!("{:<10} S = {:.6}, L_G = {:.6}, ", class.name(), c.s, c.lipschitz);
        match c.bound {
            ClassBound::Bounded { k1 } => println!("K1 = {k1:.6}"),
            ClassBound::Sublinear { k2, k2_tilde, gamma } => {
                println!("K2 = {k2:.6}, Kt2 = {k2_tilde:.6}, gamma = {gamma}")
            }
            ClassBound::Linear { k3, k3_tilde } => {
                println!("K3 = {k3:.6}, Kt3 = {k3_tilde:.6}")
            }
        }
        // amplitude profile along a ray of states
        print!("{:<10}", "");
        for r in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let u = SpectralField::unit_mode(&basis, 0, r);
            print!("sigma(|u|={r}) = {:.4}  ", model.amplitude_profile(&u));
        }
        println!();
        // class bound evaluated against the actual Hilbert-Schmidt norm
        let worst = (0..=50)
            .map(|i| {
                let r = 0.2 * i as f64;
                let u = SpectralField::unit_mode(&basis, 0, r);
                model.hs_norm_sq(&u).sqrt() - c.bound.at(r)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        println!("{:<10} max (|G(u)|_HS - class bound) over sampled u: {worst:.3e}", "");
        println!();
    }
}
