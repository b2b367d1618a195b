//! Ordered eigenbasis of the Stokes operator on the torus.
//!
//! Wavevectors are drawn from the half-lattice `{k_x > 0} ∪ {k_x = 0, k_y > 0}`
//! with `|k|_inf <= kmax`; each wavevector contributes a cosine and a sine
//! eigenfield pointing along `k_perp / |k|`, so every mode is divergence-free
//! and mean-free. Normalization makes the family L2-orthonormal on
//! `[0, 2pi)^2`:
//!
//! ```text
//! e_{k,cos}(x) = k_perp/|k| * cos(k*x) / (pi sqrt 2)
//! e_{k,sin}(x) = k_perp/|k| * sin(k*x) / (pi sqrt 2)
//! ```
//!
//! Modes are sorted by eigenvalue `lambda = |k|^2`, ties broken
//! lexicographically by `(k_x, k_y, parity)` with cosine before sine, so the
//! low-mode projections `P_N` are deterministic across runs.

use std::sync::Arc;

use super::SpectralError;

/// Amplitude of a unit-norm trigonometric eigenfield, `1 / (pi sqrt 2)`.
pub(crate) const MODE_NORM: f64 = 1.0 / (std::f64::consts::PI * std::f64::consts::SQRT_2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Cosine,
    Sine,
}

/// A single eigenmode of the Stokes operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDescriptor {
    /// Wavevector from the half-lattice; never (0, 0).
    pub k: (i32, i32),
    pub parity: Parity,
    /// Eigenvalue `|k|^2`; at least 1 for mean-free fields on the torus.
    pub lambda: f64,
}

impl ModeDescriptor {
    /// Unit direction `k_perp / |k|` of the vector eigenfield.
    pub fn direction(&self) -> (f64, f64) {
        let (kx, ky) = (self.k.0 as f64, self.k.1 as f64);
        let norm = self.lambda.sqrt();
        (-ky / norm, kx / norm)
    }
}

/// Truncated eigenbasis: all half-lattice wavevectors with `|k|_inf <= kmax`,
/// two parities each, eigenvalue-sorted.
#[derive(Debug)]
pub struct Basis {
    modes: Vec<ModeDescriptor>,
    wavevectors: Vec<(i32, i32)>,
    kmax: usize,
    grid_size: usize,
}

impl Basis {
    pub fn new(kmax: usize) -> Result<Arc<Self>, SpectralError> {
        if kmax < 1 {
            return Err(SpectralError::InvalidKmax(kmax));
        }
        let km = kmax as i32;
        let mut wavevectors = Vec::new();
        for ky in 1..=km {
            wavevectors.push((0, ky));
        }
        for kx in 1..=km {
            for ky in -km..=km {
                wavevectors.push((kx, ky));
            }
        }
        wavevectors.sort_by_key(|&(kx, ky)| (kx * kx + ky * ky, kx, ky));

        let mut modes = Vec::with_capacity(2 * wavevectors.len());
        for &k in &wavevectors {
            let lambda = (k.0 * k.0 + k.1 * k.1) as f64;
            modes.push(ModeDescriptor { k, parity: Parity::Cosine, lambda });
            modes.push(ModeDescriptor { k, parity: Parity::Sine, lambda });
        }

        // 2/3-style dealiasing: triple products of retained modes reach
        // wavenumber 3*kmax per axis, so any grid with more points than that
        // integrates them exactly. Rounded up to even for tidy bins.
        let mut grid_size = 3 * kmax + 2;
        if grid_size % 2 == 1 {
            grid_size += 1;
        }

        Ok(Arc::new(Basis { modes, wavevectors, kmax, grid_size }))
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn total_dim(&self) -> usize {
        self.modes.len()
    }

    /// Dealiasing grid resolution per axis.
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn modes(&self) -> &[ModeDescriptor] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &ModeDescriptor {
        &self.modes[j]
    }

    /// Eigenvalue of the zero-based mode index.
    pub fn lambda(&self, j: usize) -> f64 {
        self.modes[j].lambda
    }

    /// Eigenvalue `lambda_N` for one-based `N`, as used by the projections.
    pub fn eigenvalue_at(&self, n: usize) -> f64 {
        assert!(n >= 1 && n <= self.total_dim(), "mode index {n} outside basis");
        self.modes[n - 1].lambda
    }

    pub fn lambda_1(&self) -> f64 {
        self.modes[0].lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.modes[self.total_dim() - 1].lambda
    }

    /// Wavevectors in mode order; modes `2w` (cosine) and `2w+1` (sine) share
    /// wavevector `w`.
    pub(crate) fn wavevectors(&self) -> &[(i32, i32)] {
        &self.wavevectors
    }

    /// Two bases are interchangeable iff they were built with the same kmax.
    pub fn compatible(&self, other: &Basis) -> bool {
        std::ptr::eq(self, other) || self.kmax == other.kmax
    }
}
