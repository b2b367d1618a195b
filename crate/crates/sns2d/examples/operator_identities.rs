//! Spectral-operator sanity: orthonormal eigenfields, conserved convective
//! inner products, and the covariance pseudo-inverse recovering the low-mode
//! projection.
//!
//! Run with `cargo run --release --example operator_identities`.

use rand::Rng;
use sns2d::dynamics::trajectory_rng;
use sns2d::noise::{GrowthClass, NoiseModel};
use sns2d::spectral::ConvectionWorkspace;
use sns2d::{Basis, SpectralField};

fn main() {
    let basis = Basis::new(4).unwrap();
    println!(
        "basis: kmax = {}, {} modes, lambda in [{}, {}], dealiasing grid {}^2",
        basis.kmax(),
        basis.total_dim(),
        basis.lambda_1(),
        basis.lambda_max(),
        basis.grid_size()
    );

    let mut rng = trajectory_rng(1, 0, 0);
    let mut random_field = |scale: f64| {
        let coeffs = (0..basis.total_dim())
            .map(|_| scale * rng.random_range(-1.0..1.0))
            .collect();
        SpectralField::from_coeffs(&basis, coeffs).unwrap()
    };

    let mut ws = ConvectionWorkspace::new(&basis);
    let mut max_orth = 0.0f64;
    let mut max_anti = 0.0f64;
    for _ in 0..50 {
        let u = random_field(0.6);
        let v = random_field(0.6);
        let z = random_field(0.6);
        let buv = ws.bilinear(&u, &v).unwrap();
        let buz = ws.bilinear(&u, &z).unwrap();
        max_orth = max_orth.max(buv.inner(&v).unwrap().abs());
        max_anti = max_anti.max((buv.inner(&z).unwrap() + buz.inner(&v).unwrap()).abs());
    }
    println!("max |<B(u,v), v>|            = {max_orth:.3e}");
    println!("max |<B(u,v), z> + <B(u,z), v>| = {max_anti:.3e}");

    // Poincare on a sample field
    let u = random_field(1.0);
    println!(
        "Poincare: |u|_V^2 = {:.4} >= lambda_1 |u|_H^2 = {:.4}",
        u.norm_v_sq(),
        basis.lambda_1() * u.norm_h_sq()
    );

    // pseudo-inverse composition
    let model = NoiseModel::new(GrowthClass::Linear, 0.5, 8, 0, &basis).unwrap();
    let v = random_field(1.0);
    let w = random_field(1.0);
    let back = model.apply_g_cov(&v, &model.apply_g_inv(&v, &w)).unwrap();
    let pm = w.project_low(model.m()).unwrap();
    let defect = back
        .coeffs()
        .iter()
        .zip(pm.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("G(v) g(v) w vs P_m w: max defect = {defect:.3e} (m = {})", model.m());
}
