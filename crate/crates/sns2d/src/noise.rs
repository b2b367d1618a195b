//! Diagonal multiplicative noise covariance.
//!
//! The covariance acts mode-by-mode: `G(u) f_j = phi_j(u) e_j` with
//! `phi_j(u) = sigma(u) * alpha_j`, `alpha_j = 1/(j+1)` for one-based mode
//! index `j` up to `k_noise`, zero beyond. The scalar amplitude `sigma`
//! selects the growth class:
//!
//! - linear:    `sigma(u) = sqrt(|u|_H^2 + 1)`
//! - sublinear: `sigma(u) = sqrt(|u|_H^2 + 1)` for `|u|_H <= 1`,
//!   `sqrt(|u|_H^{2 gamma} + 1)` beyond, `gamma in (0,1)`
//! - bounded:   `sigma(u) = sqrt(min(|u|_H^2, 1) + 1)`
//!
//! Every profile is 1-Lipschitz in `|u|_H` and at least 1, so the
//! Hilbert-Schmidt Lipschitz constant is `L_G = sqrt(S)` with
//! `S = sum alpha_j^2`, and the low-mode pseudo-inverse
//! `g(u) e_j = phi_j(u)^{-1} f_j`, `j <= m`, exists with
//! `G(u) g(u) = P_m` exactly.
//!
//! The bounded profile is the continuous surrogate of the hard cutoff
//! `sigma = sqrt(2)` inside the unit ball, `1` outside: the cutoff itself
//! jumps at the unit sphere and would break the Lipschitz requirement, while
//! `sqrt(min(|u|^2,1)+1)` keeps both the bound `sqrt 2` and the Lipschitz
//! constant.

use thiserror::Error;

use crate::spectral::{Basis, SpectralField};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("invalid noise parameter: {0}")]
    InvalidParameter(String),
    #[error("increment has length {got}, expected k_noise = {want}")]
    LengthMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClass {
    Bounded,
    Sublinear,
    Linear,
}

impl GrowthClass {
    pub fn name(&self) -> &'static str {
        match self {
            GrowthClass::Bounded => "bounded",
            GrowthClass::Sublinear => "sublinear",
            GrowthClass::Linear => "linear",
        }
    }
}

/// Diagonal multiplicative covariance with invertible low-mode range `m`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    class: GrowthClass,
    gamma: f64,
    m: usize,
    k_noise: usize,
    amplitudes: Vec<f64>,
}

impl NoiseModel {
    /// `k_noise = 0` defaults to the full truncation.
    pub fn new(
        class: GrowthClass,
        gamma: f64,
        m: usize,
        k_noise: usize,
        basis: &Basis,
    ) -> Result<Self, NoiseError> {
        let dim = basis.total_dim();
        let k_noise = if k_noise == 0 { dim } else { k_noise };
        if k_noise > dim {
            return Err(NoiseError::InvalidParameter(format!(
                "k_noise = {k_noise} exceeds total_dim = {dim}"
            )));
        }
        if m < 1 || m > k_noise {
            return Err(NoiseError::InvalidParameter(format!(
                "m = {m} violates 1 <= m <= k_noise = {k_noise}"
            )));
        }
        if class == GrowthClass::Sublinear && !(gamma > 0.0 && gamma < 1.0) {
            return Err(NoiseError::InvalidParameter(format!(
                "gamma = {gamma} outside (0, 1)"
            )));
        }
        let amplitudes = (1..=k_noise).map(|j| 1.0 / (j as f64 + 1.0)).collect();
        Ok(NoiseModel { class, gamma, m, k_noise, amplitudes })
    }

    pub fn class(&self) -> GrowthClass {
        self.class
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Invertible low-mode range of the covariance.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of forced modes.
    pub fn k_noise(&self) -> usize {
        self.k_noise
    }

    /// Scalar amplitude `sigma(u)`.
    pub fn amplitude_profile(&self, u: &SpectralField) -> f64 {
        self.sigma_of_norm_sq(u.norm_h_sq())
    }

    pub fn sigma_of_norm_sq(&self, h2: f64) -> f64 {
        match self.class {
            GrowthClass::Linear => (h2 + 1.0).sqrt(),
            GrowthClass::Sublinear => {
                if h2 <= 1.0 {
                    (h2 + 1.0).sqrt()
                } else {
                    (h2.powf(self.gamma) + 1.0).sqrt()
                }
            }
            GrowthClass::Bounded => (h2.min(1.0) + 1.0).sqrt(),
        }
    }

    /// `phi_j(u)` for one-based mode index `j <= k_noise`.
    pub fn phi(&self, j: usize, u: &SpectralField) -> f64 {
        self.amplitude_profile(u) * self.amplitudes[j - 1]
    }

    /// Per-mode amplitude `alpha` at zero-based index.
    pub fn alpha(&self, j0: usize) -> f64 {
        self.amplitudes[j0]
    }

    /// `G(u) dw`: scale the increment by the per-mode amplitudes.
    pub fn apply_g_cov(
        &self,
        u: &SpectralField,
        dw: &[f64],
    ) -> Result<SpectralField, NoiseError> {
        if dw.len() != self.k_noise {
            return Err(NoiseError::LengthMismatch { got: dw.len(), want: self.k_noise });
        }
        let sigma = self.amplitude_profile(u);
        let mut out = SpectralField::zeros(u.basis());
        let coeffs = out.coeffs_mut();
        for (j, (a, w)) in self.amplitudes.iter().zip(dw.iter()).enumerate() {
            coeffs[j] = sigma * a * w;
        }
        Ok(out)
    }

    /// Squared Hilbert-Schmidt norm `sum_j phi_j(u)^2`.
    pub fn hs_norm_sq(&self, u: &SpectralField) -> f64 {
        let sigma = self.amplitude_profile(u);
        sigma * sigma * self.amplitude_sum_sq()
    }

    /// Pseudo-inverse `g(v) w`: component `j` is `<w, e_j> / phi_j(v)` for
    /// `j <= m`, zero above, as an increment-space vector of length
    /// `k_noise`.
    pub fn apply_g_inv(&self, v: &SpectralField, w: &SpectralField) -> Vec<f64> {
        let sigma = self.amplitude_profile(v);
        let mut out = vec![0.0; self.k_noise];
        for j in 0..self.m {
            let phi = sigma * self.amplitudes[j];
            assert!(phi > 0.0, "phi_{} vanished; sigma >= 1 should prevent this", j + 1);
            out[j] = w.coeffs()[j] / phi;
        }
        out
    }

    /// `sum_j alpha_j^2` over the truncation.
    pub fn amplitude_sum_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Constants of the growth assumptions, computed on the truncation.
    pub fn growth_constants(&self) -> GrowthConstants {
        let s = self.amplitude_sum_sq();
        let lipschitz = s.sqrt();
        let bound = match self.class {
            GrowthClass::Bounded => ClassBound::Bounded { k1: (2.0 * s).sqrt() },
            GrowthClass::Sublinear => ClassBound::Sublinear {
                k2: (2.0 * s).sqrt(),
                k2_tilde: (2.0 * s).sqrt(),
                gamma: self.gamma,
            },
            GrowthClass::Linear => ClassBound::Linear { k3: s.sqrt(), k3_tilde: s.sqrt() },
        };
        GrowthConstants { s, lipschitz, bound }
    }

    /// Uniform bound on the operator norm of the pseudo-inverse,
    /// `sup_v max_{j<=m} phi_j(v)^{-1} = m + 1` since `sigma >= 1`.
    pub fn g_inv_sup_norm(&self) -> f64 {
        (self.m + 1) as f64
    }
}

/// Lipschitz and growth-class constants over the truncated mode set.
#[derive(Debug, Clone, Copy)]
pub struct GrowthConstants {
    /// `S = sum alpha_j^2`.
    pub s: f64,
    /// `L_G = sqrt(S)`.
    pub lipschitz: f64,
    pub bound: ClassBound,
}

#[derive(Debug, Clone, Copy)]
pub enum ClassBound {
    Bounded { k1: f64 },
    Sublinear { k2: f64, k2_tilde: f64, gamma: f64 },
    Linear { k3: f64, k3_tilde: f64 },
}

impl ClassBound {
    /// Evaluate the class bound at `|u|_H = r`.
    pub fn at(&self, r: f64) -> f64 {
        match *self {
            ClassBound::Bounded { k1 } => k1,
            ClassBound::Sublinear { k2, k2_tilde, gamma } => k2 + k2_tilde * r.powf(gamma),
            ClassBound::Linear { k3, k3_tilde } => k3 + k3_tilde * r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Basis;
    use std::sync::Arc;

    fn model(class: GrowthClass, k_noise: usize) -> (NoiseModel, Arc<Basis>) {
        let basis = Basis::new(3).unwrap();
        let m = NoiseModel::new(class, 0.5, 2.min(k_noise.max(1)), k_noise, &basis).unwrap();
        (m, basis)
    }

    fn field_with_norm(basis: &Arc<Basis>, r: f64) -> SpectralField {
        let mut u = SpectralField::zeros(basis);
        u.coeffs_mut()[0] = r;
        u
    }

    #[test]
    fn linear_profile_at_origin() {
        let (m, basis) = model(GrowthClass::Linear, 0);
        let zero = SpectralField::zeros(&basis);
        assert_eq!(m.amplitude_profile(&zero), 1.0);
        // phi_2(0) = sigma * alpha_2 = 1/3
        assert!((m.phi(2, &zero) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bounded_profile_saturates() {
        let (m, basis) = model(GrowthClass::Bounded, 0);
        let u = field_with_norm(&basis, 3.0);
        assert!((m.amplitude_profile(&u) - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sublinear_profile_continuous_at_junction() {
        let (m, basis) = model(GrowthClass::Sublinear, 0);
        let u = field_with_norm(&basis, 1.0);
        assert!((m.amplitude_profile(&u) - 2.0_f64.sqrt()).abs() < 1e-15);
        let below = field_with_norm(&basis, 1.0 - 1e-9);
        let above = field_with_norm(&basis, 1.0 + 1e-9);
        assert!((m.amplitude_profile(&below) - m.amplitude_profile(&above)).abs() < 1e-8);
    }

    #[test]
    fn finite_sum_constants() {
        let basis = Basis::new(3).unwrap();
        let m = NoiseModel::new(GrowthClass::Linear, 0.5, 2, 2, &basis).unwrap();
        let s = m.amplitude_sum_sq();
        assert!((s - 13.0 / 36.0).abs() < 1e-15);
        let c = m.growth_constants();
        assert!((c.lipschitz - (13.0f64 / 36.0).sqrt()).abs() < 1e-15);
        assert!((c.lipschitz - 0.6009).abs() < 1e-4);
    }

    #[test]
    fn amplitude_series_limit() {
        // sum_{j>=1} (j+1)^{-2} = pi^2/6 - 1; a large truncation approaches it
        let basis = Basis::new(10).unwrap();
        let m = NoiseModel::new(GrowthClass::Linear, 0.5, 1, 0, &basis).unwrap();
        let s = m.amplitude_sum_sq();
        let limit = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
        assert!(s < limit);
        assert!(limit - s < 1.0 / basis.total_dim() as f64);
    }

    #[test]
    fn covariance_is_diagonal() {
        let (m, basis) = model(GrowthClass::Linear, 0);
        let u = field_with_norm(&basis, 0.7);
        let zero_inc = vec![0.0; m.k_noise()];
        assert_eq!(m.apply_g_cov(&u, &zero_inc).unwrap().norm_h_sq(), 0.0);
        let mut e3 = vec![0.0; m.k_noise()];
        e3[2] = 1.0;
        let g = m.apply_g_cov(&u, &e3).unwrap();
        for (j, c) in g.coeffs().iter().enumerate() {
            if j == 2 {
                assert!((c - m.phi(3, &u)).abs() < 1e-15);
            } else {
                assert_eq!(*c, 0.0);
            }
        }
        assert!(m.apply_g_cov(&u, &[0.0]).is_err());
    }

    #[test]
    fn parseval_on_increments() {
        let (m, basis) = model(GrowthClass::Sublinear, 0);
        let u = field_with_norm(&basis, 2.0);
        let dw: Vec<f64> = (0..m.k_noise()).map(|j| ((j * j + 1) as f64).sin()).collect();
        let g = m.apply_g_cov(&u, &dw).unwrap();
        let direct: f64 = (1..=m.k_noise()).map(|j| (m.phi(j, &u) * dw[j - 1]).powi(2)).sum();
        assert!((g.norm_h_sq() - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn hs_norm_matches_finite_sum() {
        let basis = Basis::new(3).unwrap();
        let m = NoiseModel::new(GrowthClass::Linear, 0.5, 2, 2, &basis).unwrap();
        let zero = SpectralField::zeros(&basis);
        assert!((m.hs_norm_sq(&zero) - 13.0 / 36.0).abs() < 1e-15);
        // scaling: hs / (|u|^2 + 1) constant in the linear class
        for r in [0.0, 0.5, 1.7, 4.0] {
            let u = field_with_norm(&basis, r);
            let ratio = m.hs_norm_sq(&u) / (u.norm_h_sq() + 1.0);
            assert!((ratio - 13.0 / 36.0).abs() < 1e-13);
        }
    }

    #[test]
    fn class_bounds_hold_at_sampled_states() {
        for class in [GrowthClass::Bounded, GrowthClass::Sublinear, GrowthClass::Linear] {
            let (m, basis) = model(class, 0);
            let c = m.growth_constants();
            for i in 0..1000 {
                let r = 5.0 * (i as f64 / 999.0);
                let u = field_with_norm(&basis, r);
                let hs = m.hs_norm_sq(&u).sqrt();
                assert!(
                    hs <= c.bound.at(r) + 1e-12,
                    "{} class violated at r={r}: {hs} > {}",
                    class.name(),
                    c.bound.at(r)
                );
            }
        }
    }

    #[test]
    fn bounded_class_also_satisfies_linear_bound() {
        // the bounded bound K1 works as (K3, K3_tilde) = (K1, 0)
        let (m, basis) = model(GrowthClass::Bounded, 0);
        let k1 = match m.growth_constants().bound {
            ClassBound::Bounded { k1 } => k1,
            _ => unreachable!(),
        };
        for r in [0.0, 0.3, 1.0, 2.5, 10.0] {
            let u = field_with_norm(&basis, r);
            assert!(m.hs_norm_sq(&u).sqrt() <= k1 + 0.0 * r + 1e-12);
        }
    }

    #[test]
    fn lipschitz_in_hs_norm() {
        for class in [GrowthClass::Bounded, GrowthClass::Sublinear, GrowthClass::Linear] {
            let (m, basis) = model(class, 0);
            let lg = m.growth_constants().lipschitz;
            let s_sqrt = m.amplitude_sum_sq().sqrt();
            for i in 0..1000 {
                let r1 = 4.0 * ((i * 7919 % 1000) as f64 / 1000.0);
                let r2 = 4.0 * ((i * 104729 % 1000) as f64 / 1000.0);
                let (u, v) = (field_with_norm(&basis, r1), field_with_norm(&basis, r2));
                // diagonal difference: sqrt(S) |sigma(u) - sigma(v)|
                let hs_diff =
                    s_sqrt * (m.amplitude_profile(&u) - m.amplitude_profile(&v)).abs();
                let dist = u.sub(&v).unwrap().norm_h_sq().sqrt();
                assert!(hs_diff <= lg * dist + 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_recovers_low_modes() {
        let basis = Basis::new(3).unwrap();
        let m = NoiseModel::new(GrowthClass::Linear, 0.5, 5, 12, &basis).unwrap();
        let dim = basis.total_dim();
        let v = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| ((j + 1) as f64).ln()).collect(),
        )
        .unwrap();
        let w = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| (j as f64 * 0.61).cos()).collect(),
        )
        .unwrap();
        let inc = m.apply_g_inv(&v, &w);
        let back = m.apply_g_cov(&v, &inc).unwrap();
        let pm = w.project_low(m.m()).unwrap();
        for (a, b) in back.coeffs().iter().zip(pm.coeffs()) {
            assert!((a - b).abs() <= 1e-12);
        }
        // support above m maps to zero
        let high = w.project_high(m.m()).unwrap();
        let inc = m.apply_g_inv(&v, &high);
        assert!(inc.iter().all(|x| *x == 0.0));
        // operator bound via the summed inverse amplitudes
        let sum_inv: f64 = (1..=m.m())
            .map(|j| 1.0 / (m.amplitude_profile(&v) / (j as f64 + 1.0)))
            .sum();
        let inc = m.apply_g_inv(&v, &w);
        let norm: f64 = inc.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= sum_inv * w.norm_h_sq().sqrt() + 1e-12);
    }

    #[test]
    fn phi_positive_and_decreasing() {
        let (m, basis) = model(GrowthClass::Bounded, 0);
        let u = field_with_norm(&basis, 0.4);
        let mut prev = f64::INFINITY;
        for j in 1..=m.k_noise() {
            let p = m.phi(j, &u);
            assert!(p > 0.0);
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn parameter_validation() {
        let basis = Basis::new(2).unwrap();
        assert!(NoiseModel::new(GrowthClass::Linear, 0.5, 0, 4, &basis).is_err());
        assert!(NoiseModel::new(GrowthClass::Linear, 0.5, 5, 4, &basis).is_err());
        assert!(NoiseModel::new(GrowthClass::Linear, 0.5, 1, 999, &basis).is_err());
        assert!(NoiseModel::new(GrowthClass::Sublinear, 1.0, 1, 4, &basis).is_err());
        assert!(NoiseModel::new(GrowthClass::Sublinear, 0.0, 1, 4, &basis).is_err());
    }
}
