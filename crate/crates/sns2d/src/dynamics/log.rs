//! Per-trajectory sample records.

use crate::spectral::SpectralField;

/// Absorbing stopping flag with its grid trigger time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagState {
    pub triggered: bool,
    pub time: f64,
}

impl FlagState {
    pub fn clear() -> Self {
        FlagState { triggered: false, time: f64::INFINITY }
    }
}

/// Time series sampled every `sample_stride` steps, plus final state and
/// stopping-flag summaries. Pair columns are zero for single-trajectory runs
/// (the companion then coincides with the solution).
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub trajectory: usize,
    pub dt: f64,
    pub sample_stride: usize,
    pub times: Vec<f64>,
    pub u_h2: Vec<f64>,
    pub u_v2: Vec<f64>,
    pub v_h2: Vec<f64>,
    pub diff_h2: Vec<f64>,
    pub lowdiff_h2: Vec<f64>,
    pub accum_v_norm: Vec<f64>,
    pub accum_lowdiff: Vec<f64>,
    pub accum_shift: Vec<f64>,
    pub sigma_flag: Vec<bool>,
    /// One series per configured tau monitor.
    pub tau_flags: Vec<Vec<bool>>,
    /// Leading coefficients of `u` per sample; empty when not requested.
    pub obs: Vec<Vec<f64>>,
    pub sigma: FlagState,
    pub tau: Vec<FlagState>,
    pub final_u: SpectralField,
    pub final_v: Option<SpectralField>,
    /// Full-state snapshots `(t, u, v)` at configured times.
    pub snapshots: Vec<(f64, SpectralField, Option<SpectralField>)>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample at time `t`, if `t` lies on the sample grid.
    pub fn sample_index_at(&self, t: f64) -> Option<usize> {
        let step = self.dt * self.sample_stride as f64;
        let idx = (t / step).round() as usize;
        if idx < self.times.len() && (self.times[idx] - t).abs() <= 1e-9 * step.max(1.0) {
            Some(idx)
        } else {
            None
        }
    }
}
