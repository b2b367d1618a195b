//! Dealiased pseudospectral evaluation of the convective term.
//!
//! `bilinear(u, v)` returns the Galerkin projection of `Pi (u . grad) v` onto
//! the retained modes. The product is formed on a physical grid with more
//! than `3*kmax` points per axis; since the integrand against any retained
//! eigenfield is a trigonometric polynomial of degree at most `3*kmax`, the
//! rectangle-rule quadrature behind the FFTs is exact and the orthogonality
//! `<B(u,v), v> = 0` holds to rounding.
//!
//! Leray projection is implicit: coefficients are read off against the
//! divergence-free eigenfields, which annihilate any gradient part.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::basis::{Basis, MODE_NORM};
use super::field::SpectralField;
use super::SpectralError;

/// Scratch buffers and FFT plans for convective-term evaluation.
///
/// Not thread-safe by design: each worker owns one workspace. All methods
/// leave the workspace reusable; the basis is fixed at construction.
pub struct ConvectionWorkspace {
    basis: Arc<Basis>,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    col: Vec<Complex64>,
    spec: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
    phys: [Vec<f64>; 6],
    /// per-bin true wavenumber (centered convention)
    kval: Vec<f64>,
}

impl ConvectionWorkspace {
    pub fn new(basis: &Arc<Basis>) -> Self {
        let n = basis.grid_size();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let kval = (0..n)
            .map(|i| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 })
            .collect();
        ConvectionWorkspace {
            basis: Arc::clone(basis),
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            col: vec![Complex64::default(); n],
            spec: std::array::from_fn(|_| vec![Complex64::default(); n * n]),
            tmp: vec![Complex64::default(); n * n],
            phys: std::array::from_fn(|_| vec![0.0; n * n]),
            kval,
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Galerkin coefficients of `Pi (u . grad) v`.
    pub fn bilinear(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
    ) -> Result<SpectralField, SpectralError> {
        u.check_same_basis(v)?;
        if !Arc::ptr_eq(u.basis(), &self.basis) && !self.basis.compatible(u.basis()) {
            return Err(SpectralError::BasisMismatch);
        }
        let n = self.n;

        // u in physical space
        self.scatter(u, 0, 1);
        for comp in 0..2 {
            self.tmp.copy_from_slice(&self.spec[comp]);
            self.ifft2();
            for (dst, z) in self.phys[comp].iter_mut().zip(self.tmp.iter()) {
                *dst = z.re;
            }
        }

        // grad v in physical space: phys[2..6] = dx vx, dy vx, dx vy, dy vy
        self.scatter(v, 2, 3);
        for (slot, (comp, axis)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            let src = 2 + comp;
            for ix in 0..n {
                for iy in 0..n {
                    let k = if *axis == 0 { self.kval[ix] } else { self.kval[iy] };
                    let z = self.spec[src][ix * n + iy];
                    // multiply by i*k
                    self.tmp[ix * n + iy] = Complex64::new(-k * z.im, k * z.re);
                }
            }
            self.ifft2();
            for (dst, z) in self.phys[2 + slot].iter_mut().zip(self.tmp.iter()) {
                *dst = z.re;
            }
        }

        // w = (u . grad) v, assembled per component and transformed back;
        // spec[0], spec[1] are free again and receive w-hat.
        for comp in 0..2 {
            let (gx, gy) = (2 + 2 * comp, 3 + 2 * comp);
            for i in 0..n * n {
                let w = self.phys[0][i] * self.phys[gx][i] + self.phys[1][i] * self.phys[gy][i];
                self.tmp[i] = Complex64::new(w, 0.0);
            }
            self.fft2();
            let scale = 1.0 / (n * n) as f64;
            for (dst, z) in self.spec[comp].iter_mut().zip(self.tmp.iter()) {
                *dst = z * scale;
            }
        }

        // read coefficients against the eigenfields
        let gather = 2.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI;
        let mut coeffs = vec![0.0; self.basis.total_dim()];
        for (w, &(kx, ky)) in self.basis.wavevectors().iter().enumerate() {
            let (dx, dy) = self.basis.mode(2 * w).direction();
            let bx = kx.rem_euclid(n as i32) as usize;
            let by = ky.rem_euclid(n as i32) as usize;
            let zx = self.spec[0][bx * n + by];
            let zy = self.spec[1][bx * n + by];
            coeffs[2 * w] = gather * (dx * zx.re + dy * zy.re);
            coeffs[2 * w + 1] = -gather * (dx * zx.im + dy * zy.im);
        }
        SpectralField::from_coeffs(&self.basis, coeffs)
    }

    /// Spread a field's complex amplitudes onto spectral grids for the two
    /// velocity components, with Hermitian symmetry.
    fn scatter(&mut self, f: &SpectralField, slot_x: usize, slot_y: usize) {
        let n = self.n;
        for slot in [slot_x, slot_y] {
            self.spec[slot].fill(Complex64::default());
        }
        let half_amp = 0.5 * MODE_NORM;
        let coeffs = f.coeffs();
        for (w, &(kx, ky)) in self.basis.wavevectors().iter().enumerate() {
            let (dx, dy) = self.basis.mode(2 * w).direction();
            let cc = coeffs[2 * w];
            let cs = coeffs[2 * w + 1];
            if cc == 0.0 && cs == 0.0 {
                continue;
            }
            // u contribution: Re[(cc - i cs) e^{i k.x}] * d * MODE_NORM
            let z = Complex64::new(half_amp * cc, -half_amp * cs);
            let bx = kx.rem_euclid(n as i32) as usize;
            let by = ky.rem_euclid(n as i32) as usize;
            let cx = (-kx).rem_euclid(n as i32) as usize;
            let cy = (-ky).rem_euclid(n as i32) as usize;
            self.spec[slot_x][bx * n + by] += dx * z;
            self.spec[slot_x][cx * n + cy] += dx * z.conj();
            self.spec[slot_y][bx * n + by] += dy * z;
            self.spec[slot_y][cx * n + cy] += dy * z.conj();
        }
    }

    fn fft2(&mut self) {
        self.transform2(true);
    }

    fn ifft2(&mut self) {
        self.transform2(false);
    }

    /// In-place 2D transform of `self.tmp`: rows are contiguous, columns go
    /// through a gather buffer.
    fn transform2(&mut self, forward: bool) {
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        plan.process_with_scratch(&mut self.tmp, &mut self.scratch);
        for iy in 0..n {
            for ix in 0..n {
                self.col[ix] = self.tmp[ix * n + iy];
            }
            plan.process_with_scratch(&mut self.col, &mut self.scratch);
            for ix in 0..n {
                self.tmp[ix * n + iy] = self.col[ix];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_of_zero_vanishes() {
        let basis = Basis::new(3).unwrap();
        let mut ws = ConvectionWorkspace::new(&basis);
        let z = SpectralField::zeros(&basis);
        let coeffs: Vec<f64> = (0..basis.total_dim()).map(|j| (j as f64 * 0.37).sin()).collect();
        let v = SpectralField::from_coeffs(&basis, coeffs).unwrap();
        let b = ws.bilinear(&z, &v).unwrap();
        assert_eq!(b.norm_h_sq(), 0.0);
    }

    #[test]
    fn single_shear_mode_self_advects_to_zero() {
        // For one trig mode the velocity is constant along its own direction,
        // so (u.grad)u vanishes identically.
        let basis = Basis::new(2).unwrap();
        let mut ws = ConvectionWorkspace::new(&basis);
        let j = basis.modes().iter().position(|m| m.k == (1, 0)).unwrap();
        let u = SpectralField::unit_mode(&basis, j, 1.3);
        let b = ws.bilinear(&u, &u).unwrap();
        assert!(b.norm_h_sq() <= 1e-28, "got {}", b.norm_h_sq());
    }

    #[test]
    fn known_interaction_coefficient() {
        // u = e_{(0,1),cos}, v = e_{(1,0),cos}: the product lands on the
        // (1,1)/(1,-1) sine shell; the (1,1) sine coefficient is 1/(4 pi)
        // by direct quadrature of sin(x)cos(y) against the eigenfield.
        let basis = Basis::new(1).unwrap();
        let mut ws = ConvectionWorkspace::new(&basis);
        let ju = basis
            .modes()
            .iter()
            .position(|m| m.k == (0, 1) && m.parity == Parity::Cosine)
            .unwrap();
        let jv = basis
            .modes()
            .iter()
            .position(|m| m.k == (1, 0) && m.parity == Parity::Cosine)
            .unwrap();
        let u = SpectralField::unit_mode(&basis, ju, 1.0);
        let v = SpectralField::unit_mode(&basis, jv, 1.0);
        let b = ws.bilinear(&u, &v).unwrap();
        let js = basis
            .modes()
            .iter()
            .position(|m| m.k == (1, 1) && m.parity == Parity::Sine)
            .unwrap();
        let expect = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((b.coeffs()[js] - expect).abs() < 1e-13, "got {}", b.coeffs()[js]);
    }

    use super::super::basis::Parity;

    #[test]
    fn orthogonality_in_second_argument() {
        let basis = Basis::new(3).unwrap();
        let mut ws = ConvectionWorkspace::new(&basis);
        let dim = basis.total_dim();
        let mk = |seed: u64| {
            let coeffs: Vec<f64> = (0..dim)
                .map(|j| ((j as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0 - 0.5)
                .collect();
            SpectralField::from_coeffs(&basis, coeffs).unwrap()
        };
        for seed in 0..20 {
            let u = mk(seed);
            let v = mk(seed + 1000);
            let b = ws.bilinear(&u, &v).unwrap();
            let ip = b.inner(&v).unwrap();
            let scale = u.norm_v_sq().sqrt() * v.norm_v_sq();
            assert!(ip.abs() <= 1e-10 * scale, "<B(u,v),v> = {ip}, scale {scale}");
        }
    }

    #[test]
    fn antisymmetry_in_trailing_arguments() {
        let basis = Basis::new(3).unwrap();
        let mut ws = ConvectionWorkspace::new(&basis);
        let dim = basis.total_dim();
        let mk = |seed: u64| {
            let coeffs: Vec<f64> = (0..dim)
                .map(|j| (((j as u64 + 7) * 1099087573 + seed) % 1000) as f64 / 500.0 - 1.0)
                .collect();
            SpectralField::from_coeffs(&basis, coeffs).unwrap()
        };
        for seed in 0..10 {
            let u = mk(3 * seed);
            let v = mk(3 * seed + 1);
            let z = mk(3 * seed + 2);
            let buv = ws.bilinear(&u, &v).unwrap();
            let buz = ws.bilinear(&u, &z).unwrap();
            let lhs = buv.inner(&z).unwrap();
            let rhs = -buz.inner(&v).unwrap();
            let scale = u.norm_v_sq().sqrt() * v.norm_v_sq().sqrt() * z.norm_v_sq().sqrt();
            assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1.0), "{lhs} vs {rhs}");
        }
    }
}
