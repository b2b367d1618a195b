//! Spectral-Galerkin toolkit for the two-dimensional stochastic Navier-Stokes
//! equations with multiplicative noise.
//!
//! The library simulates the velocity equation
//!
//! ```text
//! du + [nu A u + B(u,u)] dt = f dt + G(u) dW
//! ```
//!
//! on the 2pi-periodic torus in a divergence-free real Fourier basis, together
//! with a *nudged* companion copy driven by the same Wiener increments plus a
//! low-mode feedback term `lambda P_N (u - v)`. On top of the integrator sit
//! statistical verifiers: synchronization-decay estimation and fitting,
//! energy-moment and martingale-tail checks, stopping-time statistics, and
//! empirical-measure distances for mixing experiments.
//!
//! Entry points:
//! - [`spectral`]: basis construction, norms, projections, Stokes operator and
//!   the dealiased convective term.
//! - [`noise`]: diagonal multiplicative covariance with bounded / sublinear /
//!   linear growth and its low-mode pseudo-inverse.
//! - [`dynamics`]: semi-implicit Euler-Maruyama stepping of single
//!   trajectories and coupled pairs, stopping-time monitors, ensembles.
//! - [`diagnostics`]: decay curves, regression fits, moment / tail /
//!   stopping-probability checks.
//! - [`ergodicity`]: empirical measures, dual-Lipschitz and sliced
//!   1-Wasserstein distances, mixing and coupling experiments.
//! - [`config`] / [`experiment`]: INI-style experiment specs, orchestration,
//!   CSV reports, checkpointing.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the thin `sns2d` binary drives whole experiments from a config file.

// indexed loops walk several parallel coefficient arrays; negated float
// comparisons are deliberate NaN guards
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod ergodicity;
pub mod experiment;
pub mod noise;
pub mod spectral;

pub use spectral::{Basis, ModeDescriptor, Parity, SpectralField};
