#![allow(dead_code)]

//! Shared test oracles: direct trigonometric evaluation of fields and the
//! convective term by plain quadrature, independent of the FFT pipeline.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sns2d::dynamics::trajectory_rng;
use sns2d::{Basis, Parity, SpectralField};

pub const MODE_NORM: f64 = 1.0 / (std::f64::consts::PI * std::f64::consts::SQRT_2);

/// Evaluate a field's two velocity components on an `n x n` grid by direct
/// summation over modes.
pub fn eval_field(field: &SpectralField, n: usize) -> (Vec<f64>, Vec<f64>) {
    let basis = field.basis();
    let mut ux = vec![0.0; n * n];
    let mut uy = vec![0.0; n * n];
    let h = 2.0 * std::f64::consts::PI / n as f64;
    for (j, mode) in basis.modes().iter().enumerate() {
        let c = field.coeffs()[j];
        if c == 0.0 {
            continue;
        }
        let (dx, dy) = mode.direction();
        for ix in 0..n {
            for iy in 0..n {
                let phase = mode.k.0 as f64 * (ix as f64 * h) + mode.k.1 as f64 * (iy as f64 * h);
                let basis_val = match mode.parity {
                    Parity::Cosine => phase.cos(),
                    Parity::Sine => phase.sin(),
                } * MODE_NORM;
                ux[ix * n + iy] += c * dx * basis_val;
                uy[ix * n + iy] += c * dy * basis_val;
            }
        }
    }
    (ux, uy)
}

/// Gradient of each component, evaluated directly.
pub fn eval_gradient(field: &SpectralField, n: usize) -> [Vec<f64>; 4] {
    let basis = field.basis();
    let mut out = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
    let h = 2.0 * std::f64::consts::PI / n as f64;
    for (j, mode) in basis.modes().iter().enumerate() {
        let c = field.coeffs()[j];
        if c == 0.0 {
            continue;
        }
        let (dx, dy) = mode.direction();
        let (kx, ky) = (mode.k.0 as f64, mode.k.1 as f64);
        for ix in 0..n {
            for iy in 0..n {
                let phase = kx * (ix as f64 * h) + ky * (iy as f64 * h);
                // derivative of the scalar carrier
                let (ddx, ddy) = match mode.parity {
                    Parity::Cosine => (-kx * phase.sin(), -ky * phase.sin()),
                    Parity::Sine => (kx * phase.cos(), ky * phase.cos()),
                };
                let i = ix * n + iy;
                out[0][i] += c * dx * ddx * MODE_NORM; // dx of component x
                out[1][i] += c * dx * ddy * MODE_NORM; // dy of component x
                out[2][i] += c * dy * ddx * MODE_NORM; // dx of component y
                out[3][i] += c * dy * ddy * MODE_NORM; // dy of component y
            }
        }
    }
    out
}

/// Quadrature inner product of two grid-sampled vector fields.
pub fn quad_inner(ax: &[f64], ay: &[f64], bx: &[f64], by: &[f64], n: usize) -> f64 {
    let w = (2.0 * std::f64::consts::PI / n as f64).powi(2);
    let mut sum = 0.0;
    for i in 0..n * n {
        sum += ax[i] * bx[i] + ay[i] * by[i];
    }
    sum * w
}

/// Brute-force convective term `(u . grad) v` projected onto the basis by
/// quadrature; independent of the FFT path.
pub fn slow_bilinear(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let basis = u.basis();
    let n = basis.grid_size();
    let (ux, uy) = eval_field(u, n);
    let grad = eval_gradient(v, n);
    let mut wx = vec![0.0; n * n];
    let mut wy = vec![0.0; n * n];
    for i in 0..n * n {
        wx[i] = ux[i] * grad[0][i] + uy[i] * grad[1][i];
        wy[i] = ux[i] * grad[2][i] + uy[i] * grad[3][i];
    }
    let quad_w = (2.0 * std::f64::consts::PI / n as f64).powi(2);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let coeffs = basis
        .modes()
        .iter()
        .map(|mode| {
            let (dx, dy) = mode.direction();
            let mut sum = 0.0;
            for ix in 0..n {
                for iy in 0..n {
                    let phase =
                        mode.k.0 as f64 * (ix as f64 * h) + mode.k.1 as f64 * (iy as f64 * h);
                    let basis_val = match mode.parity {
                        Parity::Cosine => phase.cos(),
                        Parity::Sine => phase.sin(),
                    } * MODE_NORM;
                    let i = ix * n + iy;
                    sum += (wx[i] * dx + wy[i] * dy) * basis_val;
                }
            }
            sum * quad_w
        })
        .collect();
    SpectralField::from_coeffs(basis, coeffs).expect("dimension matches")
}

/// Deterministic pseudo-random field with O(1) coefficients.
pub fn random_field(basis: &Arc<Basis>, seed: u64, scale: f64) -> SpectralField {
    let mut rng: ChaCha8Rng = trajectory_rng(seed, 0xF1E1D, 0);
    let coeffs = (0..basis.total_dim())
        .map(|_| scale * rng.random_range(-1.0..1.0))
        .collect();
    SpectralField::from_coeffs(basis, coeffs).expect("dimension matches")
}
