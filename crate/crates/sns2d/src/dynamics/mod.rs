//! Time integration of the stochastic velocity equation and its nudged
//! companion.
//!
//! The scheme is semi-implicit Euler-Maruyama: viscosity (and the nudging
//! term) are treated implicitly, which is exact mode-by-mode since both are
//! diagonal; the convective term and the noise are explicit, with the noise
//! coefficient frozen at the left endpoint (Ito). One step of the pair
//! `(u, v)` driven by shared increments `dW`:
//!
//! ```text
//! u' = (u + dt (f - B(u,u)) + G(u) dW) / (1 + nu dt lambda_j)
//! v' : (1 + nu dt lambda_j + lambda dt) v'_j = rhs_v_j + lambda dt u'_j   (j <= N)
//! ```
//!
//! Running integrals (`|u|_V^2`, `|P_N(u-v)|_H^2`, `|h|_U^2`) use
//! left-endpoint quadrature; stopping flags are re-evaluated on the grid
//! after each step and are absorbing.

mod ensemble;
mod log;
mod rng;
mod stepper;

pub use ensemble::{run_ensemble, run_ensemble_stream, run_trajectory, run_trajectory_from};
pub use log::{FlagState, TrajectoryLog};
pub use rng::{derive_seed, draw_increments, draw_increments_vec, trajectory_rng};
pub use stepper::{compute_shift, PairState, Stepper};

use std::sync::Arc;

use thiserror::Error;

use crate::noise::{NoiseError, NoiseModel};
use crate::spectral::{Basis, SpectralError, SpectralField};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("trajectory {trajectory} blew up at t = {time:.6} (|u|_H^2 > {ceiling:.3e})")]
    Blowup { trajectory: usize, time: f64, ceiling: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// Low-mode feedback configuration.
#[derive(Debug, Clone)]
pub struct NudgeConfig {
    pub enabled: bool,
    /// Number of nudged modes (one-based projection index).
    pub n: usize,
    /// Feedback gain; the canonical choice is `nu * lambda_N / 2`.
    pub lambda: f64,
    /// Budget for the accumulated low-mode squared difference; infinity
    /// disables the sigma stopping time.
    pub girsanov_k: f64,
    /// In the stopped variant the nudging term is dropped once sigma fires.
    pub stop_on_sigma: bool,
}

impl NudgeConfig {
    pub fn disabled() -> Self {
        NudgeConfig {
            enabled: false,
            n: 0,
            lambda: 0.0,
            girsanov_k: f64::INFINITY,
            stop_on_sigma: false,
        }
    }
}

/// The canonical feedback gain `nu * lambda_N / 2`.
pub fn default_nudge_gain(nu: f64, basis: &Basis, n: usize) -> f64 {
    nu * basis.eigenvalue_at(n) / 2.0
}

/// A `(R, beta)` threshold pair for the growth stopping time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMonitor {
    pub r: f64,
    pub beta: f64,
}

/// Everything a trajectory needs: operators, forcing, noise, feedback,
/// monitors, sampling and reproducibility parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub basis: Arc<Basis>,
    pub nu: f64,
    pub forcing: SpectralField,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub ensemble_size: usize,
    pub sample_stride: usize,
    pub noise: Option<NoiseModel>,
    pub nudge: NudgeConfig,
    pub tau_monitors: Vec<TauMonitor>,
    pub blowup_ceiling: f64,
    /// How many leading coefficients of `u` each sample records.
    pub obs_modes: usize,
}

impl SimConfig {
    /// Deterministic single-trajectory skeleton; callers adjust fields.
    pub fn deterministic(basis: &Arc<Basis>, nu: f64, dt: f64, n_steps: usize) -> Self {
        SimConfig {
            basis: Arc::clone(basis),
            nu,
            forcing: SpectralField::zeros(basis),
            dt,
            n_steps,
            seed: 0,
            ensemble_size: 1,
            sample_stride: 1,
            noise: None,
            nudge: NudgeConfig::disabled(),
            tau_monitors: Vec::new(),
            blowup_ceiling: 1e12,
            obs_modes: 0,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// `lambda_N` of the nudged projection; panics if no `n` is configured.
    pub fn lambda_n(&self) -> f64 {
        self.basis.eigenvalue_at(self.nudge.n)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let dim = self.basis.total_dim();
        let err = |msg: String| Err(SimError::Config(msg));
        if !(self.nu > 0.0) {
            return err(format!("sim.nu = {} must be positive", self.nu));
        }
        if !(self.dt > 0.0) {
            return err(format!("sim.dt = {} must be positive", self.dt));
        }
        if self.n_steps == 0 {
            return err("horizon shorter than one step (dt <= horizon required)".into());
        }
        if self.ensemble_size == 0 {
            return err("sim.ensemble_size must be at least 1".into());
        }
        if self.sample_stride == 0 || !self.n_steps.is_multiple_of(self.sample_stride) {
            return err(format!(
                "sim.sample_stride = {} must divide the step count {}",
                self.sample_stride, self.n_steps
            ));
        }
        if !self.forcing.basis().compatible(&self.basis) {
            return err("forcing field built on a different basis".into());
        }
        if !(self.blowup_ceiling > 0.0) {
            return err("sim.blowup_ceiling must be positive".into());
        }
        if self.obs_modes > dim {
            return err(format!(
                "observables.modes = {} exceeds total_dim = {dim}",
                self.obs_modes
            ));
        }
        if self.nudge.enabled {
            if self.nudge.n < 1 || self.nudge.n > dim {
                return err(format!(
                    "nudge.n = {} outside 1..={dim}",
                    self.nudge.n
                ));
            }
            if !(self.nudge.lambda >= 0.0) {
                return err(format!("nudge.lambda = {} must be nonnegative", self.nudge.lambda));
            }
            if let Some(noise) = &self.noise {
                if self.nudge.n > noise.m() {
                    return err(format!(
                        "nudge.n = {} > noise.m = {}: the low-mode shift g(v) P_N(u-v) \
                         requires the covariance to be invertible on all nudged modes \
                         (m >= n)",
                        self.nudge.n,
                        noise.m()
                    ));
                }
            }
            if self.nudge.stop_on_sigma && !self.nudge.girsanov_k.is_finite() {
                return err(
                    "nudge.mode = nudged_stopped requires a finite nudge.girsanov_k".into(),
                );
            }
        }
        if self.nudge.girsanov_k < 0.0 || self.nudge.girsanov_k.is_nan() {
            return err(format!(
                "nudge.girsanov_k = {} must be nonnegative (or inf to disable)",
                self.nudge.girsanov_k
            ));
        }
        if !self.tau_monitors.is_empty() && (self.nudge.n < 1 || self.nudge.n > dim) {
            return err(format!(
                "tau monitors need nudge.n in 1..={dim} to define lambda_N (got {})",
                self.nudge.n
            ));
        }
        Ok(())
    }

    /// Step-size guideline `dt <= min(0.1/(nu lambda_max), 0.1/lambda)`;
    /// violations are worth a warning, not an error.
    pub fn dt_guideline(&self) -> f64 {
        let mut cap = 0.1 / (self.nu * self.basis.lambda_max());
        if self.nudge.enabled && self.nudge.lambda > 0.0 {
            cap = cap.min(0.1 / self.nudge.lambda);
        }
        cap
    }

    pub fn sample_count(&self) -> usize {
        self.n_steps / self.sample_stride + 1
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.sample_count())
            .map(|i| (i * self.sample_stride) as f64 * self.dt)
            .collect()
    }
}
