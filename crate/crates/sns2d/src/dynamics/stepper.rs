//! One-step updates, running integrals and stopping-time monitors.

use crate::noise::NoiseModel;
use crate::spectral::{ConvectionWorkspace, SpectralField};

use super::log::FlagState;
use super::{SimConfig, SimError};

/// A coupled trajectory pair with its running integrals and stopping flags.
///
/// For single-trajectory runs `v` is absent; the pair quantities are then
/// identically zero.
#[derive(Debug, Clone)]
pub struct PairState {
    pub step: usize,
    pub u: SpectralField,
    pub v: Option<SpectralField>,
    /// Left-endpoint `int_0^t |u|_V^2`.
    pub accum_v_norm: f64,
    /// Left-endpoint `int_0^t |P_N(u-v)|_H^2`.
    pub accum_lowdiff: f64,
    /// Left-endpoint `int_0^t |h|_U^2` of the low-mode shift.
    pub accum_shift: f64,
    pub sigma: FlagState,
    pub tau: Vec<FlagState>,
}

impl PairState {
    pub fn new(u: SpectralField, v: Option<SpectralField>, n_tau: usize) -> Self {
        PairState {
            step: 0,
            u,
            v,
            accum_v_norm: 0.0,
            accum_lowdiff: 0.0,
            accum_shift: 0.0,
            sigma: FlagState::clear(),
            tau: vec![FlagState::clear(); n_tau],
        }
    }

    pub fn time(&self, dt: f64) -> f64 {
        self.step as f64 * dt
    }
}

/// The low-mode shift `h = lambda g(v) P_N(u - v)` as an increment-space
/// vector, zero once the sigma stopping time has fired.
pub fn compute_shift(
    u: &SpectralField,
    v: &SpectralField,
    noise: &NoiseModel,
    lambda: f64,
    n: usize,
    sigma_triggered: bool,
) -> Vec<f64> {
    let mut out = vec![0.0; noise.k_noise()];
    if !sigma_triggered {
        fill_shift(&mut out, u, v, noise, lambda, n);
    }
    out
}

fn fill_shift(
    out: &mut [f64],
    u: &SpectralField,
    v: &SpectralField,
    noise: &NoiseModel,
    lambda: f64,
    n: usize,
) {
    let sigma = noise.amplitude_profile(v);
    let active = n.min(noise.m());
    for (j, slot) in out.iter_mut().enumerate() {
        if j < active {
            let phi = sigma * noise.alpha(j);
            *slot = lambda * (u.coeffs()[j] - v.coeffs()[j]) / phi;
        } else {
            *slot = 0.0;
        }
    }
}

/// Semi-implicit Euler-Maruyama stepper bound to one config.
///
/// Owns the transform workspace and scratch; one instance per worker.
pub struct Stepper<'a> {
    cfg: &'a SimConfig,
    ws: ConvectionWorkspace,
    /// `1 / (1 + nu dt lambda_j)`
    inv_denom: Vec<f64>,
    /// `lambda dt / (1 + nu dt lambda_j + lambda dt)` on the nudged range
    nudge_factor: Vec<f64>,
    /// `L_G^2 - nu lambda_N / 4`, the drift of the tau functional
    tau_drift: f64,
    shift_buf: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SimConfig) -> Self {
        let dim = cfg.basis.total_dim();
        let inv_denom: Vec<f64> = (0..dim)
            .map(|j| 1.0 / (1.0 + cfg.nu * cfg.dt * cfg.basis.lambda(j)))
            .collect();
        let nudge_n = if cfg.nudge.enabled { cfg.nudge.n } else { 0 };
        let nudge_factor: Vec<f64> = (0..nudge_n)
            .map(|j| {
                let a = cfg.nu * cfg.dt * cfg.basis.lambda(j);
                cfg.nudge.lambda * cfg.dt / (1.0 + a + cfg.nudge.lambda * cfg.dt)
            })
            .collect();
        let l_g_sq = cfg
            .noise
            .as_ref()
            .map(|n| n.growth_constants().s)
            .unwrap_or(0.0);
        let tau_drift = if cfg.nudge.n >= 1 {
            l_g_sq - cfg.nu * cfg.basis.eigenvalue_at(cfg.nudge.n) / 4.0
        } else {
            l_g_sq
        };
        let shift_buf = vec![0.0; cfg.noise.as_ref().map(|n| n.k_noise()).unwrap_or(0)];
        Stepper { cfg, ws: ConvectionWorkspace::new(&cfg.basis), inv_denom, nudge_factor, tau_drift, shift_buf }
    }

    pub fn config(&self) -> &SimConfig {
        self.cfg
    }

    /// Advance a single trajectory by one step.
    pub fn step_single(
        &mut self,
        u: &SpectralField,
        dw: Option<&[f64]>,
    ) -> Result<SpectralField, SimError> {
        let cfg = self.cfg;
        let b = self.ws.bilinear(u, u)?;
        let mut next = SpectralField::zeros(&cfg.basis);
        let g = match (&cfg.noise, dw) {
            (Some(noise), Some(dw)) => Some(noise.apply_g_cov(u, dw)?),
            _ => None,
        };
        {
            let out = next.coeffs_mut();
            for j in 0..out.len() {
                let mut rhs = u.coeffs()[j]
                    + cfg.dt * (cfg.forcing.coeffs()[j] - b.coeffs()[j]);
                if let Some(g) = &g {
                    rhs += g.coeffs()[j];
                }
                out[j] = rhs * self.inv_denom[j];
            }
        }
        Ok(next)
    }

    /// Advance the pair state by one step with shared increments, updating
    /// accumulators and re-evaluating the stopping flags on the new grid
    /// point.
    pub fn step_pair(
        &mut self,
        state: &mut PairState,
        dw: Option<&[f64]>,
        trajectory: usize,
    ) -> Result<(), SimError> {
        let cfg = self.cfg;
        let dt = cfg.dt;

        // Left-endpoint integrands.
        let u_v2 = state.u.norm_v_sq();
        let nudge_n = cfg.nudge.n;
        let (lowdiff, shift_sq) = match &state.v {
            Some(v) if nudge_n >= 1 => {
                let mut low = 0.0;
                for j in 0..nudge_n {
                    let d = state.u.coeffs()[j] - v.coeffs()[j];
                    low += d * d;
                }
                let shift_sq = match &cfg.noise {
                    Some(noise) if cfg.nudge.enabled && !state.sigma.triggered => {
                        fill_shift(&mut self.shift_buf, &state.u, v, noise, cfg.nudge.lambda, nudge_n);
                        self.shift_buf.iter().map(|x| x * x).sum()
                    }
                    _ => 0.0,
                };
                (low, shift_sq)
            }
            _ => (0.0, 0.0),
        };

        let nudge_active = cfg.nudge.enabled
            && !(cfg.nudge.stop_on_sigma && state.sigma.triggered);

        // u update
        let bu = self.ws.bilinear(&state.u, &state.u)?;
        let gu = match (&cfg.noise, dw) {
            (Some(noise), Some(dw)) => Some(noise.apply_g_cov(&state.u, dw)?),
            _ => None,
        };
        let mut u_next = SpectralField::zeros(&cfg.basis);
        {
            let out = u_next.coeffs_mut();
            for j in 0..out.len() {
                let mut rhs = state.u.coeffs()[j]
                    + dt * (cfg.forcing.coeffs()[j] - bu.coeffs()[j]);
                if let Some(g) = &gu {
                    rhs += g.coeffs()[j];
                }
                out[j] = rhs * self.inv_denom[j];
            }
        }

        // v update with the same increments
        let v_next = match &state.v {
            Some(v) => {
                let bv = self.ws.bilinear(v, v)?;
                let gv = match (&cfg.noise, dw) {
                    (Some(noise), Some(dw)) => Some(noise.apply_g_cov(v, dw)?),
                    _ => None,
                };
                let mut vn = SpectralField::zeros(&cfg.basis);
                {
                    let out = vn.coeffs_mut();
                    for j in 0..out.len() {
                        let mut rhs = v.coeffs()[j]
                            + dt * (cfg.forcing.coeffs()[j] - bv.coeffs()[j]);
                        if let Some(g) = &gv {
                            rhs += g.coeffs()[j];
                        }
                        let unnudged = rhs * self.inv_denom[j];
                        out[j] = if nudge_active && j < self.nudge_factor.len() {
                            unnudged + self.nudge_factor[j] * (u_next.coeffs()[j] - unnudged)
                        } else {
                            unnudged
                        };
                    }
                }
                Some(vn)
            }
            None => None,
        };

        state.accum_v_norm += dt * u_v2;
        state.accum_lowdiff += dt * lowdiff;
        state.accum_shift += dt * shift_sq;
        state.step += 1;
        state.u = u_next;
        state.v = v_next;

        let t = state.time(dt);
        let ceiling = cfg.blowup_ceiling;
        let u_h2 = state.u.norm_h_sq();
        if !u_h2.is_finite() || u_h2 > ceiling {
            return Err(SimError::Blowup { trajectory, time: t, ceiling });
        }
        if let Some(v) = &state.v {
            let v_h2 = v.norm_h_sq();
            if !v_h2.is_finite() || v_h2 > ceiling {
                return Err(SimError::Blowup { trajectory, time: t, ceiling });
            }
        }

        self.refresh_flags(state, t);
        Ok(())
    }

    /// Re-evaluate stopping flags at grid time `t`; flags are absorbing.
    fn refresh_flags(&self, state: &mut PairState, t: f64) {
        let cfg = self.cfg;
        if !state.sigma.triggered && cfg.nudge.girsanov_k.is_finite() {
            let k = cfg.nudge.girsanov_k;
            let fired = if k > 0.0 {
                state.accum_lowdiff >= k
            } else {
                state.accum_lowdiff > 0.0
            };
            if fired {
                state.sigma = FlagState { triggered: true, time: t };
            }
        }
        for (monitor, flag) in cfg.tau_monitors.iter().zip(state.tau.iter_mut()) {
            if !flag.triggered {
                let value = state.accum_v_norm / cfg.nu + self.tau_drift * t - monitor.beta;
                if value >= monitor.r {
                    *flag = FlagState { triggered: true, time: t };
                }
            }
        }
    }

    /// Value of the monitored tau functional at the current grid point.
    pub fn tau_functional(&self, state: &PairState) -> f64 {
        state.accum_v_norm / self.cfg.nu + self.tau_drift * state.time(self.cfg.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{draw_increments_vec, trajectory_rng, NudgeConfig};
    use crate::noise::{GrowthClass, NoiseModel};
    use crate::spectral::Basis;

    #[test]
    fn rest_state_stays_at_rest() {
        let basis = Basis::new(2).unwrap();
        let cfg = SimConfig::deterministic(&basis, 1.0, 0.01, 10);
        let mut stepper = Stepper::new(&cfg);
        let u = SpectralField::zeros(&basis);
        let next = stepper.step_single(&u, None).unwrap();
        assert_eq!(next.norm_h_sq(), 0.0);
    }

    #[test]
    fn single_mode_decays_by_scalar_recursion() {
        // One shear mode kills the convective term, so each step is exactly
        // one division by (1 + nu dt).
        let basis = Basis::new(2).unwrap();
        let nu = 0.7;
        let dt = 0.01;
        let cfg = SimConfig::deterministic(&basis, nu, dt, 100);
        let mut stepper = Stepper::new(&cfg);
        let mut u = SpectralField::unit_mode(&basis, 0, 1.0);
        for step in 1..=100usize {
            u = stepper.step_single(&u, None).unwrap();
            let expect = (1.0 + nu * dt).powi(-(step as i32));
            assert!(
                (u.coeffs()[0] - expect).abs() <= 1e-13 * expect,
                "step {step}: {} vs {expect}",
                u.coeffs()[0]
            );
        }
    }

    #[test]
    fn one_step_energy_inequality_noise_off() {
        let basis = Basis::new(3).unwrap();
        let dim = basis.total_dim();
        let mut cfg = SimConfig::deterministic(&basis, 1.0, 1e-3, 1);
        let f = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| if j < 4 { 0.2 } else { 0.0 }).collect(),
        )
        .unwrap();
        cfg.forcing = f.clone();
        let mut stepper = Stepper::new(&cfg);
        let u = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| ((j * 13 + 1) as f64).sin() * 0.4).collect(),
        )
        .unwrap();
        let next = stepper.step_single(&u, None).unwrap();
        let lhs = next.norm_h_sq();
        let rhs = u.norm_h_sq() + 2.0 * cfg.dt * f.inner(&next).unwrap();
        assert!(lhs <= rhs + 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn identical_pair_stays_identical_bitwise() {
        let basis = Basis::new(2).unwrap();
        let mut cfg = SimConfig::deterministic(&basis, 1.0, 0.01, 50);
        cfg.noise =
            Some(NoiseModel::new(GrowthClass::Bounded, 0.5, 4, 0, &basis).unwrap());
        cfg.nudge = NudgeConfig {
            enabled: true,
            n: 4,
            lambda: 2.0,
            girsanov_k: f64::INFINITY,
            stop_on_sigma: false,
        };
        let dim = basis.total_dim();
        let u0 = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| 0.3 / (j as f64 + 1.0)).collect(),
        )
        .unwrap();
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(u0.clone(), Some(u0), 0);
        let mut rng = trajectory_rng(3, 0, 0);
        let k = cfg.noise.as_ref().unwrap().k_noise();
        for _ in 0..cfg.n_steps {
            let dw = draw_increments_vec(&mut rng, k, cfg.dt);
            stepper.step_pair(&mut state, Some(&dw), 0).unwrap();
        }
        let v = state.v.as_ref().unwrap();
        for (a, b) in state.u.coeffs().iter().zip(v.coeffs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(state.accum_lowdiff, 0.0);
        assert_eq!(state.accum_shift, 0.0);
    }

    #[test]
    fn zero_gain_matches_disabled_nudging() {
        let basis = Basis::new(2).unwrap();
        let dim = basis.total_dim();
        let mk_cfg = |enabled: bool| {
            let mut cfg = SimConfig::deterministic(&basis, 0.5, 0.01, 40);
            cfg.noise =
                Some(NoiseModel::new(GrowthClass::Linear, 0.5, 4, 0, &basis).unwrap());
            cfg.nudge = NudgeConfig {
                enabled,
                n: 4,
                lambda: 0.0,
                girsanov_k: f64::INFINITY,
                stop_on_sigma: false,
            };
            cfg
        };
        let u0 = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| ((j + 1) as f64).recip()).collect(),
        )
        .unwrap();
        let v0 = SpectralField::unit_mode(&basis, 1, 0.5);
        let mut finals = Vec::new();
        for enabled in [true, false] {
            let cfg = mk_cfg(enabled);
            let mut stepper = Stepper::new(&cfg);
            let mut state = PairState::new(u0.clone(), Some(v0.clone()), 0);
            let mut rng = trajectory_rng(11, 0, 0);
            let k = cfg.noise.as_ref().unwrap().k_noise();
            for _ in 0..cfg.n_steps {
                let dw = draw_increments_vec(&mut rng, k, cfg.dt);
                stepper.step_pair(&mut state, Some(&dw), 0).unwrap();
            }
            finals.push(state.v.unwrap());
        }
        for (a, b) in finals[0].coeffs().iter().zip(finals[1].coeffs()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fully_nudged_difference_contracts_at_linear_rate() {
        // noise off, f = 0, every mode nudged: the difference obeys the
        // implicit recursion up to a quadratic correction, so for small data
        // it decays at least like (1 + dt (nu lambda_1 + lambda))^{-2n}.
        let basis = Basis::new(2).unwrap();
        let dim = basis.total_dim();
        let nu = 1.0;
        let dt = 0.01;
        let lambda = 3.0;
        let mut cfg = SimConfig::deterministic(&basis, nu, dt, 100);
        cfg.nudge = NudgeConfig {
            enabled: true,
            n: dim,
            lambda,
            girsanov_k: f64::INFINITY,
            stop_on_sigma: false,
        };
        let eps = 1e-3;
        let u0 = SpectralField::from_coeffs(
            &basis,
            (0..dim).map(|j| eps / (j as f64 + 1.0)).collect(),
        )
        .unwrap();
        let v0 = SpectralField::zeros(&basis);
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(u0.clone(), Some(v0), 0);
        let r0 = u0.norm_h_sq();
        for step in 1..=cfg.n_steps {
            stepper.step_pair(&mut state, None, 0).unwrap();
            let r = state
                .u
                .sub(state.v.as_ref().unwrap())
                .unwrap()
                .norm_h_sq();
            let bound = r0 * (1.0 + dt * (nu + lambda)).powi(-2 * step as i32);
            assert!(r <= bound * 1.01, "step {step}: {r} vs {bound}");
        }
    }

    #[test]
    fn unconditional_stability_of_nudged_copy() {
        // noise and forcing off: |v|_H never grows, for any dt
        let basis = Basis::new(2).unwrap();
        let dim = basis.total_dim();
        for dt in [0.01, 1.0, 50.0] {
            let mut cfg = SimConfig::deterministic(&basis, 1.0, dt, 20);
            cfg.nudge = NudgeConfig {
                enabled: true,
                n: dim,
                lambda: 100.0,
                girsanov_k: f64::INFINITY,
                stop_on_sigma: false,
            };
            let u0 = SpectralField::zeros(&basis);
            let v0 = SpectralField::from_coeffs(
                &basis,
                (0..dim).map(|j| 0.05 * ((j * 3 + 2) as f64).cos()).collect(),
            )
            .unwrap();
            let mut stepper = Stepper::new(&cfg);
            let mut state = PairState::new(u0, Some(v0.clone()), 0);
            let mut prev = v0.norm_h_sq();
            for _ in 0..cfg.n_steps {
                stepper.step_pair(&mut state, None, 0).unwrap();
                let now = state.v.as_ref().unwrap().norm_h_sq();
                assert!(now <= prev * (1.0 + 1e-12), "{now} > {prev} at dt={dt}");
                prev = now;
            }
        }
    }

    #[test]
    fn sigma_monitor_semantics() {
        let basis = Basis::new(1).unwrap();
        let mk = |girsanov_k: f64, stop: bool| {
            let mut cfg = SimConfig::deterministic(&basis, 1.0, 0.1, 10);
            cfg.nudge = NudgeConfig {
                enabled: true,
                n: 2,
                lambda: 1.0,
                girsanov_k,
                stop_on_sigma: stop,
            };
            cfg
        };
        let u0 = SpectralField::unit_mode(&basis, 0, 1.0);
        let v0 = SpectralField::zeros(&basis);

        // K = infinity: flag permanently false
        let cfg = mk(f64::INFINITY, false);
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(u0.clone(), Some(v0.clone()), 0);
        for _ in 0..10 {
            stepper.step_pair(&mut state, None, 0).unwrap();
        }
        assert!(!state.sigma.triggered);

        // K = 0: triggers at the first step with any low-mode difference
        let cfg = mk(0.0, false);
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(u0.clone(), Some(v0.clone()), 0);
        stepper.step_pair(&mut state, None, 0).unwrap();
        assert!(state.sigma.triggered);
        assert_eq!(state.sigma.time, 0.1);

        // K = 0 with identical start: never triggers
        let cfg = mk(0.0, false);
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(u0.clone(), Some(u0.clone()), 0);
        for _ in 0..10 {
            stepper.step_pair(&mut state, None, 0).unwrap();
        }
        assert!(!state.sigma.triggered);
    }

    #[test]
    fn tau_monitor_never_fires_on_quiet_dynamics() {
        // u = 0 and L_G^2 < nu lambda_N / 4: the functional is nonpositive
        let basis = Basis::new(2).unwrap();
        let mut cfg = SimConfig::deterministic(&basis, 4.0, 0.05, 40);
        cfg.nudge.n = basis.total_dim();
        cfg.tau_monitors = vec![
            crate::dynamics::TauMonitor { r: 0.5, beta: 0.0 },
            crate::dynamics::TauMonitor { r: 2.0, beta: 1.0 },
        ];
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(SpectralField::zeros(&basis), None, 2);
        for _ in 0..cfg.n_steps {
            stepper.step_pair(&mut state, None, 0).unwrap();
        }
        assert!(state.tau.iter().all(|f| !f.triggered));
    }

    #[test]
    fn blowup_reported_with_time_stamp() {
        let basis = Basis::new(1).unwrap();
        let mut cfg = SimConfig::deterministic(&basis, 1.0, 0.1, 100);
        cfg.blowup_ceiling = 1.0;
        cfg.forcing = SpectralField::unit_mode(&basis, 0, 100.0);
        let mut stepper = Stepper::new(&cfg);
        let mut state = PairState::new(SpectralField::zeros(&basis), None, 0);
        let mut failed_at = None;
        for _ in 0..cfg.n_steps {
            if let Err(SimError::Blowup { time, trajectory, .. }) =
                stepper.step_pair(&mut state, None, 7)
            {
                failed_at = Some((time, trajectory));
                break;
            }
        }
        let (time, trajectory) = failed_at.expect("forced blowup");
        assert_eq!(trajectory, 7);
        assert!(time > 0.0);
    }
}
