//! Velocity fields as real coefficient vectors over a [`Basis`].

use std::io::{Read, Write};
use std::sync::Arc;

use super::basis::Basis;
use super::SpectralError;

/// A divergence-free velocity field, stored as coefficients in basis order.
///
/// Norms are coefficient-wise because the basis diagonalizes the Stokes
/// operator: `|u|_H^2 = sum c_j^2`, `|u|_V^2 = sum lambda_j c_j^2`,
/// `|u|_{V*}^2 = sum c_j^2 / lambda_j`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        SpectralField { basis: Arc::clone(basis), coeffs: vec![0.0; basis.total_dim()] }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.len() != basis.total_dim() {
            return Err(SpectralError::DimensionMismatch {
                got: coeffs.len(),
                want: basis.total_dim(),
            });
        }
        Ok(SpectralField { basis: Arc::clone(basis), coeffs })
    }

    /// Unit coefficient on a single zero-based mode index.
    pub fn unit_mode(basis: &Arc<Basis>, j: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[j] = amplitude;
        f
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn check_same_basis(&self, other: &SpectralField) -> Result<(), SpectralError> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis.compatible(&other.basis) {
            Ok(())
        } else {
            Err(SpectralError::BasisMismatch)
        }
    }

    pub fn norm_h_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm_v_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| self.basis.lambda(j) * c * c)
            .sum()
    }

    pub fn norm_vstar_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * c / self.basis.lambda(j))
            .sum()
    }

    pub fn inner(&self, other: &SpectralField) -> Result<f64, SpectralError> {
        self.check_same_basis(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Stokes operator: coefficient-wise multiplication by the eigenvalues.
    pub fn apply_stokes(&self) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| self.basis.lambda(j) * c)
            .collect();
        SpectralField { basis: Arc::clone(&self.basis), coeffs }
    }

    /// Solve `(I + c A) w = u`, the implicit step of the viscous term.
    pub fn solve_implicit(&self, c: f64) -> Result<SpectralField, SpectralError> {
        if c < 0.0 {
            return Err(SpectralError::InvalidArgument(format!(
                "implicit coefficient must be nonnegative, got {c}"
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, v)| v / (1.0 + c * self.basis.lambda(j)))
            .collect();
        Ok(SpectralField { basis: Arc::clone(&self.basis), coeffs })
    }

    /// `P_N`: keep the first `n` coefficients (one-based `n`), zero the rest.
    pub fn project_low(&self, n: usize) -> Result<SpectralField, SpectralError> {
        self.check_projection_index(n)?;
        let mut out = self.clone();
        for c in out.coeffs[n..].iter_mut() {
            *c = 0.0;
        }
        Ok(out)
    }

    /// `Q_N`: zero the first `n` coefficients, keep the rest.
    pub fn project_high(&self, n: usize) -> Result<SpectralField, SpectralError> {
        self.check_projection_index(n)?;
        let mut out = self.clone();
        for c in out.coeffs[..n].iter_mut() {
            *c = 0.0;
        }
        Ok(out)
    }

    /// `|P_N u|_H^2` without allocating the projection.
    pub fn low_mode_norm_h_sq(&self, n: usize) -> f64 {
        self.coeffs[..n.min(self.coeffs.len())].iter().map(|c| c * c).sum()
    }

    fn check_projection_index(&self, n: usize) -> Result<(), SpectralError> {
        let dim = self.basis.total_dim();
        if n < 1 || n > dim {
            return Err(SpectralError::ProjectionRange { n, dim });
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let coeffs = self.coeffs.iter().map(|c| s * c).collect();
        SpectralField { basis: Arc::clone(&self.basis), coeffs }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.check_same_basis(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(SpectralField { basis: Arc::clone(&self.basis), coeffs })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.check_same_basis(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(SpectralField { basis: Arc::clone(&self.basis), coeffs })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Serialize as `(kmax, total_dim)` header plus coefficients, all
    /// little-endian; the layout shared by checkpoints and snapshot export.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), SpectralError> {
        w.write_all(&(self.basis.kmax() as u32).to_le_bytes())?;
        w.write_all(&(self.basis.total_dim() as u32).to_le_bytes())?;
        for c in &self.coeffs {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, basis: &Arc<Basis>) -> Result<Self, SpectralError> {
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let kmax = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        if kmax != basis.kmax() || dim != basis.total_dim() {
            return Err(SpectralError::Corrupt(format!(
                "field header (kmax={kmax}, dim={dim}) does not match basis \
                 (kmax={}, dim={})",
                basis.kmax(),
                basis.total_dim()
            )));
        }
        let mut coeffs = vec![0.0; dim];
        let mut b8 = [0u8; 8];
        for c in coeffs.iter_mut() {
            r.read_exact(&mut b8)?;
            *c = f64::from_le_bytes(b8);
        }
        Ok(SpectralField { basis: Arc::clone(basis), coeffs })
    }
}
