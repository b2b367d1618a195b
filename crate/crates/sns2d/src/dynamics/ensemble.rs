//! Parallel ensembles of independent trajectories.
//!
//! Trajectory `i` draws from a stream derived from `(seed, stream, i)`, so
//! the ensemble is reproducible regardless of worker scheduling and the
//! first half of a doubled ensemble is unchanged. Logs are collected in
//! trajectory order.

use rayon::prelude::*;

use crate::spectral::SpectralField;

use super::log::TrajectoryLog;
use super::rng::{draw_increments, trajectory_rng};
use super::stepper::{PairState, Stepper};
use super::{SimConfig, SimError};

/// Stream tag for the main ensemble; experiments needing independent
/// ensembles (mixing, calibration) pass other tags.
pub const MAIN_STREAM: u64 = 0;

pub fn run_ensemble(
    cfg: &SimConfig,
    u0: &SpectralField,
    v0: Option<&SpectralField>,
) -> Result<Vec<TrajectoryLog>, SimError> {
    run_ensemble_stream(cfg, u0, v0, MAIN_STREAM)
}

pub fn run_ensemble_stream(
    cfg: &SimConfig,
    u0: &SpectralField,
    v0: Option<&SpectralField>,
    stream: u64,
) -> Result<Vec<TrajectoryLog>, SimError> {
    cfg.validate()?;
    (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| run_trajectory(cfg, u0, v0, i, stream, &[]))
        .collect()
}

/// Run one trajectory (pair when `v0` is given), sampling every
/// `sample_stride` steps and snapshotting the full state at `snapshot_times`
/// (grid-snapped).
pub fn run_trajectory(
    cfg: &SimConfig,
    u0: &SpectralField,
    v0: Option<&SpectralField>,
    index: usize,
    stream: u64,
    snapshot_times: &[f64],
) -> Result<TrajectoryLog, SimError> {
    let state = PairState::new(u0.clone(), v0.cloned(), cfg.tau_monitors.len());
    run_trajectory_from(cfg, state, index, stream, None, snapshot_times, |_, _| {})
}

/// Drive a trajectory from an arbitrary starting state, optionally fast-
/// forwarding the noise stream to `word_pos` (resume support). The hook sees
/// the state and the stream position after every step, which is what a
/// checkpoint needs to capture.
pub fn run_trajectory_from(
    cfg: &SimConfig,
    start: PairState,
    index: usize,
    stream: u64,
    word_pos: Option<u128>,
    snapshot_times: &[f64],
    mut hook: impl FnMut(&PairState, u128),
) -> Result<TrajectoryLog, SimError> {
    let mut rng = trajectory_rng(cfg.seed, stream, index as u64);
    if let Some(pos) = word_pos {
        rng.set_word_pos(pos);
    }
    let mut stepper = Stepper::new(cfg);
    let mut state = start;
    let mut log = LogBuilder::new(cfg, index);
    let mut dw: Vec<f64> = Vec::new();
    let k_noise = cfg.noise.as_ref().map(|n| n.k_noise()).unwrap_or(0);

    let snapshot_steps: Vec<usize> = snapshot_times
        .iter()
        .map(|t| (t / cfg.dt).round() as usize)
        .collect();

    if state.step.is_multiple_of(cfg.sample_stride) {
        log.record(&state);
    }
    if snapshot_steps.contains(&state.step) {
        log.snapshot(&state);
    }
    while state.step < cfg.n_steps {
        let inc = if cfg.noise.is_some() {
            draw_increments(&mut rng, k_noise, cfg.dt, &mut dw);
            Some(dw.as_slice())
        } else {
            None
        };
        stepper.step_pair(&mut state, inc, index)?;
        if state.step.is_multiple_of(cfg.sample_stride) {
            log.record(&state);
        }
        if snapshot_steps.contains(&state.step) {
            log.snapshot(&state);
        }
        hook(&state, rng.get_word_pos());
    }
    Ok(log.finish(state))
}

struct LogBuilder<'a> {
    cfg: &'a SimConfig,
    log: TrajectoryLog,
}

impl<'a> LogBuilder<'a> {
    fn new(cfg: &'a SimConfig, index: usize) -> Self {
        let samples = cfg.sample_count();
        let log = TrajectoryLog {
            trajectory: index,
            dt: cfg.dt,
            sample_stride: cfg.sample_stride,
            times: Vec::with_capacity(samples),
            u_h2: Vec::with_capacity(samples),
            u_v2: Vec::with_capacity(samples),
            v_h2: Vec::with_capacity(samples),
            diff_h2: Vec::with_capacity(samples),
            lowdiff_h2: Vec::with_capacity(samples),
            accum_v_norm: Vec::with_capacity(samples),
            accum_lowdiff: Vec::with_capacity(samples),
            accum_shift: Vec::with_capacity(samples),
            sigma_flag: Vec::with_capacity(samples),
            tau_flags: vec![Vec::with_capacity(samples); cfg.tau_monitors.len()],
            obs: Vec::new(),
            sigma: crate::dynamics::FlagState::clear(),
            tau: Vec::new(),
            final_u: SpectralField::zeros(&cfg.basis),
            final_v: None,
            snapshots: Vec::new(),
        };
        LogBuilder { cfg, log }
    }

    fn record(&mut self, state: &PairState) {
        let log = &mut self.log;
        log.times.push(state.time(self.cfg.dt));
        log.u_h2.push(state.u.norm_h_sq());
        log.u_v2.push(state.u.norm_v_sq());
        match &state.v {
            Some(v) => {
                log.v_h2.push(v.norm_h_sq());
                let mut diff = 0.0;
                let mut low = 0.0;
                let n = self.cfg.nudge.n;
                for (j, (a, b)) in state.u.coeffs().iter().zip(v.coeffs()).enumerate() {
                    let d = a - b;
                    diff += d * d;
                    if j < n {
                        low += d * d;
                    }
                }
                log.diff_h2.push(diff);
                log.lowdiff_h2.push(low);
            }
            None => {
                log.v_h2.push(state.u.norm_h_sq());
                log.diff_h2.push(0.0);
                log.lowdiff_h2.push(0.0);
            }
        }
        log.accum_v_norm.push(state.accum_v_norm);
        log.accum_lowdiff.push(state.accum_lowdiff);
        log.accum_shift.push(state.accum_shift);
        log.sigma_flag.push(state.sigma.triggered);
        for (series, flag) in log.tau_flags.iter_mut().zip(state.tau.iter()) {
            series.push(flag.triggered);
        }
        if self.cfg.obs_modes > 0 {
            log.obs.push(state.u.coeffs()[..self.cfg.obs_modes].to_vec());
        }
    }

    fn snapshot(&mut self, state: &PairState) {
        self.log.snapshots.push((
            state.time(self.cfg.dt),
            state.u.clone(),
            state.v.clone(),
        ));
    }

    fn finish(mut self, state: PairState) -> TrajectoryLog {
        self.log.sigma = state.sigma;
        self.log.tau = state.tau;
        self.log.final_u = state.u;
        self.log.final_v = state.v;
        self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NudgeConfig;
    use crate::noise::{GrowthClass, NoiseModel};
    use crate::spectral::Basis;

    fn stochastic_cfg(ensemble: usize) -> SimConfig {
        let basis = Basis::new(2).unwrap();
        let mut cfg = SimConfig::deterministic(&basis, 1.0, 0.01, 50);
        cfg.ensemble_size = ensemble;
        cfg.sample_stride = 5;
        cfg.noise = Some(NoiseModel::new(GrowthClass::Bounded, 0.5, 4, 0, &basis).unwrap());
        cfg.seed = 99;
        cfg
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let cfg = stochastic_cfg(4);
        let u0 = SpectralField::unit_mode(&cfg.basis, 0, 0.5);
        let a = run_ensemble(&cfg, &u0, None).unwrap();
        let b = run_ensemble(&cfg, &u0, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.times, y.times);
            for (p, q) in x.u_h2.iter().zip(&y.u_h2) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
            for (p, q) in x.final_u.coeffs().iter().zip(y.final_u.coeffs()) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn singleton_ensemble_equals_direct_run() {
        let cfg = stochastic_cfg(1);
        let u0 = SpectralField::unit_mode(&cfg.basis, 1, 0.3);
        let ens = run_ensemble(&cfg, &u0, None).unwrap();
        let direct = run_trajectory(&cfg, &u0, None, 0, MAIN_STREAM, &[]).unwrap();
        assert_eq!(ens.len(), 1);
        assert_eq!(ens[0].u_h2, direct.u_h2);
    }

    #[test]
    fn doubling_preserves_leading_trajectories() {
        let small = stochastic_cfg(3);
        let mut big = stochastic_cfg(6);
        big.seed = small.seed;
        let u0 = SpectralField::unit_mode(&small.basis, 0, 1.0);
        let a = run_ensemble(&small, &u0, None).unwrap();
        let b = run_ensemble(&big, &u0, None).unwrap();
        for (x, y) in a.iter().zip(b.iter().take(3)) {
            assert_eq!(x.u_h2, y.u_h2);
        }
    }

    #[test]
    fn streams_are_independent() {
        let cfg = stochastic_cfg(2);
        let u0 = SpectralField::unit_mode(&cfg.basis, 0, 1.0);
        let a = run_ensemble_stream(&cfg, &u0, None, 0).unwrap();
        let b = run_ensemble_stream(&cfg, &u0, None, 1).unwrap();
        assert_ne!(a[0].u_h2, b[0].u_h2);
    }

    #[test]
    fn pair_runs_log_difference_columns() {
        let mut cfg = stochastic_cfg(2);
        cfg.nudge = NudgeConfig {
            enabled: true,
            n: 4,
            lambda: 1.0,
            girsanov_k: f64::INFINITY,
            stop_on_sigma: false,
        };
        let u0 = SpectralField::unit_mode(&cfg.basis, 0, 1.0);
        let v0 = SpectralField::zeros(&cfg.basis);
        let logs = run_ensemble(&cfg, &u0, Some(&v0)).unwrap();
        for log in &logs {
            assert_eq!(log.diff_h2[0], 1.0);
            assert!(log.diff_h2.last().unwrap() < &1.0);
            assert!(log.final_v.is_some());
            // accumulators are nondecreasing
            for w in log.accum_v_norm.windows(2) {
                assert!(w[1] >= w[0]);
            }
            for w in log.accum_lowdiff.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn accumulator_matches_left_endpoint_sum_at_stride_one() {
        let mut cfg = stochastic_cfg(1);
        cfg.sample_stride = 1;
        let u0 = SpectralField::unit_mode(&cfg.basis, 0, 0.8);
        let log = &run_ensemble(&cfg, &u0, None).unwrap()[0];
        let mut riemann = 0.0;
        for i in 1..log.len() {
            riemann += cfg.dt * log.u_v2[i - 1];
            let err = (log.accum_v_norm[i] - riemann).abs();
            assert!(err <= 1e-12 * riemann.max(1.0), "sample {i}: {err}");
        }
    }

    #[test]
    fn blowup_carries_trajectory_index() {
        let mut cfg = stochastic_cfg(3);
        cfg.blowup_ceiling = 1e-6;
        cfg.forcing = SpectralField::unit_mode(&cfg.basis, 0, 10.0);
        let u0 = SpectralField::zeros(&cfg.basis);
        match run_ensemble(&cfg, &u0, None) {
            Err(SimError::Blowup { .. }) => {}
            other => panic!("expected blowup, got {other:?}"),
        }
    }
}
