//! Divergence-free spectral basis on the 2pi-periodic torus and the
//! deterministic operators of the velocity equation.
//!
//! The Stokes operator is diagonal here: mode `j` carries eigenvalue
//! `lambda_j = |k|^2`, so the H, V and V* norms, the heat solve and the
//! spectral projections are all coefficient-wise. The only nontrivial
//! operator is the convective term, computed pseudospectrally on a grid
//! wide enough that retained-mode coefficients are quadrature-exact.

mod basis;
mod bilinear;
mod field;

pub use basis::{Basis, ModeDescriptor, Parity};
pub use bilinear::ConvectionWorkspace;
pub use field::SpectralField;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("kmax must be at least 1, got {0}")]
    InvalidKmax(usize),
    #[error("fields belong to different bases")]
    BasisMismatch,
    #[error("coefficient vector has length {got}, basis dimension is {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("projection index {n} outside 1..={dim}")]
    ProjectionRange { n: usize, dim: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt field data: {0}")]
    Corrupt(String),
}
