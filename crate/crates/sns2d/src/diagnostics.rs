//! Statistical verdicts over trajectory ensembles.
//!
//! Every check compares an ensemble estimate against a closed-form bound
//! computed from the configured constants, with a declared error budget:
//! 2x standard error for mean-type inequalities, Wilson 95% radii for
//! probabilities. Estimates are pure post-processing over immutable logs.

use thiserror::Error;

use crate::dynamics::{SimConfig, SimError, Stepper, TrajectoryLog};
use crate::noise::{ClassBound, GrowthConstants};
use crate::spectral::SpectralField;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("need at least {want} logs, got {got}")]
    TooFewLogs { got: usize, want: usize },
    #[error("logs do not share a common sample grid")]
    GridMismatch,
    #[error("unusable fit window: {0}")]
    Window(String),
    #[error("tau monitor index {0} not present in logs")]
    MissingMonitor(usize),
    #[error("inadmissible parameter: {0}")]
    Inadmissible(String),
    #[error("check not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
}

// ---------------------------------------------------------------------------
// small statistics helpers

/// Sample mean and standard error (std / sqrt(n)).
///
/// Summation runs in value order, so the result does not depend on how the
/// samples were arranged.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wilson 95% half-width for `k` successes out of `n`.
pub fn wilson_radius(k: usize, n: usize) -> f64 {
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom
}

/// Least squares of `y` on `x`; returns (slope, intercept, r_squared).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

fn common_grid(logs: &[TrajectoryLog]) -> Result<Vec<f64>, DiagError> {
    if logs.len() < 2 {
        return Err(DiagError::TooFewLogs { got: logs.len(), want: 2 });
    }
    let times = &logs[0].times;
    for log in &logs[1..] {
        if log.times != *times {
            return Err(DiagError::GridMismatch);
        }
    }
    Ok(times.clone())
}

// ---------------------------------------------------------------------------
// constants of the energy estimates

/// Parameters shared by the moment, tail and stopping-probability checks.
#[derive(Debug, Clone, Copy)]
pub struct EstimateContext {
    pub nu: f64,
    pub lambda_1: f64,
    /// `|f|_{V*}^2` of the deterministic forcing.
    pub f_vstar_sq: f64,
    /// `|u_0|_H^2` of the ensemble's initial condition.
    pub u0_h2: f64,
    /// Noise constants; `None` means the noise is off, which behaves as a
    /// bounded class with `K_1 = 0`.
    pub constants: Option<GrowthConstants>,
}

impl EstimateContext {
    pub fn new(cfg: &SimConfig, u0: &SpectralField) -> Self {
        EstimateContext {
            nu: cfg.nu,
            lambda_1: cfg.basis.lambda_1(),
            f_vstar_sq: cfg.forcing.norm_vstar_sq(),
            u0_h2: u0.norm_h_sq(),
            constants: cfg.noise.as_ref().map(|n| n.growth_constants()),
        }
    }

    pub fn class_bound(&self) -> ClassBound {
        self.constants
            .map(|c| c.bound)
            .unwrap_or(ClassBound::Bounded { k1: 0.0 })
    }

    pub fn lipschitz_sq(&self) -> f64 {
        self.constants.map(|c| c.s).unwrap_or(0.0)
    }
}

/// Drift/dissipation constants `(a, b)` of the mean energy estimate
/// `E|u(t)|^2 + a int E|u|_V^2 <= |u_0|^2 + b t`, realized with explicit
/// Young-inequality splittings:
///
/// - bounded:   `a = nu`, `b = K1^2 + |f|_{V*}^2 / nu`
/// - sublinear: `a = nu`,
///   `b = 2 K2^2 + 2 Kt2^2 (1-g) s^{-g/(1-g)} + 2 |f|_{V*}^2 / nu`
///   with `s = nu lambda_1 / (4 Kt2^2 g)`
/// - linear (needs `nu > Kt3^2 / (2 lambda_1)`):
///   `a = nu - Kt3^2 / (2 lambda_1)`,
///   `b = (1 + 1/eps) K3^2 + 2 |f|_{V*}^2 / a`, `eps = lambda_1 a / (2 Kt3^2)`
#[derive(Debug, Clone, Copy)]
pub struct MomentConstants {
    pub a: f64,
    pub b: f64,
    /// Drift constant of the unbounded-class tail functional: any value at
    /// least `max(1 + b, 2)` makes the recentred supremum dominated by
    /// `sup_t [M(t) - t - 2]` pathwise.
    pub c_b: f64,
}

pub fn moment_constants(ctx: &EstimateContext) -> Result<MomentConstants, DiagError> {
    let nu = ctx.nu;
    let (a, b) = match ctx.class_bound() {
        ClassBound::Bounded { k1 } => (nu, k1 * k1 + ctx.f_vstar_sq / nu),
        ClassBound::Sublinear { k2, k2_tilde, gamma } => {
            let s = nu * ctx.lambda_1 / (4.0 * k2_tilde * k2_tilde * gamma);
            let b = 2.0 * k2 * k2
                + 2.0 * k2_tilde * k2_tilde * (1.0 - gamma) * s.powf(-gamma / (1.0 - gamma))
                + 2.0 * ctx.f_vstar_sq / nu;
            (nu, b)
        }
        ClassBound::Linear { k3, k3_tilde } => {
            let a = nu - k3_tilde * k3_tilde / (2.0 * ctx.lambda_1);
            if a <= 0.0 {
                return Err(DiagError::NotApplicable(format!(
                    "linear class needs nu > Kt3^2/(2 lambda_1) = {:.6}, got nu = {nu}",
                    k3_tilde * k3_tilde / (2.0 * ctx.lambda_1)
                )));
            }
            let eps = ctx.lambda_1 * a / (2.0 * k3_tilde * k3_tilde);
            let b = (1.0 + 1.0 / eps) * k3 * k3 + 2.0 * ctx.f_vstar_sq / a;
            (a, b)
        }
    };
    Ok(MomentConstants { a, b, c_b: (1.0 + b).max(2.0) })
}

// ---------------------------------------------------------------------------
// decay curves and fits

/// Ensemble mean of `|u - v|_H^2` over time with standard errors.
#[derive(Debug, Clone)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub ensemble: usize,
}

impl DecayCurve {
    /// Highest mean value and ratio of the peak to the final mean.
    pub fn peak_and_drop(&self) -> (f64, f64) {
        let peak = self.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let last = *self.mean.last().unwrap_or(&f64::NAN);
        (peak, peak / last)
    }
}

pub fn estimate_decay(logs: &[TrajectoryLog]) -> Result<DecayCurve, DiagError> {
    let times = common_grid(logs)?;
    let mut mean = Vec::with_capacity(times.len());
    let mut se = Vec::with_capacity(times.len());
    let mut column = vec![0.0; logs.len()];
    for i in 0..times.len() {
        for (slot, log) in column.iter_mut().zip(logs) {
            *slot = log.diff_h2[i];
        }
        let (m, s) = mean_se(&column);
        mean.push(m);
        se.push(s);
    }
    Ok(DecayCurve { times, mean, se, ensemble: logs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `C e^{-delta t}`: log-mean regressed on `t`.
    Exponential,
    /// `C / t^p`: log-mean regressed on `log t`.
    Polynomial,
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::Exponential => "exponential",
            FitModel::Polynomial => "polynomial",
        }
    }
}

/// Fitted decay rate (`delta` per unit time, or the exponent `p`).
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: FitModel,
    pub rate: f64,
    pub log_prefactor: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    /// Admissible exponent interval for the linear noise class, with the
    /// verdict on whether the fitted exponent falls inside it.
    pub admissible: Option<(f64, f64, bool)>,
}

pub fn fit_decay(
    curve: &DecayCurve,
    model: FitModel,
    window: (f64, f64),
) -> Result<FitReport, DiagError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, m) in curve.times.iter().zip(&curve.mean) {
        if *t < window.0 || *t > window.1 {
            continue;
        }
        if model == FitModel::Polynomial && *t <= 0.0 {
            continue;
        }
        if !(*m > 0.0) {
            return Err(DiagError::Window(format!(
                "nonpositive mean {m} at t = {t}; shrink the window to exclude it"
            )));
        }
        xs.push(match model {
            FitModel::Exponential => *t,
            FitModel::Polynomial => t.ln(),
        });
        ys.push(m.ln());
    }
    if xs.len() < 5 {
        return Err(DiagError::Window(format!(
            "{} usable points in [{}, {}], need at least 5; widen the window",
            xs.len(),
            window.0,
            window.1
        )));
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(FitReport {
        model,
        rate: -slope,
        log_prefactor: intercept,
        window,
        r_squared: r2,
        points: xs.len(),
        admissible: None,
    })
}

/// Admissible polynomial-exponent interval
/// `(0, nu lambda_1 / (4 Kt3^2) - 3/8)` of the linear noise class, with the
/// verdict for a fitted exponent; `None` for the other classes.
pub fn linear_class_admissible(ctx: &EstimateContext, rate: f64) -> Option<(f64, f64, bool)> {
    match ctx.class_bound() {
        ClassBound::Linear { k3_tilde, .. } => {
            let hi = ctx.nu * ctx.lambda_1 / (4.0 * k3_tilde * k3_tilde) - 3.0 / 8.0;
            Some((0.0, hi, rate > 0.0 && rate < hi))
        }
        _ => None,
    }
}

/// Default fit window: drop an initial transient of
/// `max(5 samples, 10% of the horizon)`.
pub fn default_fit_window(times: &[f64]) -> (f64, f64) {
    let horizon = *times.last().unwrap_or(&0.0);
    let five = times.get(5).copied().unwrap_or(0.0);
    (five.max(0.1 * horizon), horizon)
}

// ---------------------------------------------------------------------------
// weighted contraction

/// Row-per-sample record for mean-versus-bound checks.
#[derive(Debug, Clone)]
pub struct BoundCheckRow {
    pub time: f64,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub rows: Vec<BoundCheckRow>,
    /// `max_t (mean - 2 SE - bound)`; nonpositive when the estimate is
    /// consistent with the inequality.
    pub max_violation_2se: f64,
    pub ok: bool,
}

/// Weighted contraction of same-noise uncontrolled pairs started at
/// `(x, y)`: the ensemble mean of
/// `exp(-(L_G^2 t - lambda_1 nu t + (1/nu) int |u|_V^2)) |u - v|_H^2`
/// must stay at or below `|x - y|_H^2`, within `3x` relative standard error.
pub fn check_weighted_contraction(
    logs: &[TrajectoryLog],
    ctx: &EstimateContext,
) -> Result<ContractionReport, DiagError> {
    let times = common_grid(logs)?;
    let bound = logs[0].diff_h2[0];
    let lg_sq = ctx.lipschitz_sq();
    let mut rows = Vec::with_capacity(times.len());
    let mut max_violation = f64::NEG_INFINITY;
    let mut column = vec![0.0; logs.len()];
    for (i, t) in times.iter().enumerate() {
        for (slot, log) in column.iter_mut().zip(logs) {
            let exponent = lg_sq * t - ctx.lambda_1 * ctx.nu * t + log.accum_v_norm[i] / ctx.nu;
            *slot = (-exponent).exp() * log.diff_h2[i];
        }
        let (mean, se) = mean_se(&column);
        let margin = if mean > 0.0 { 3.0 * se / mean } else { 0.0 };
        let ok = mean <= bound * (1.0 + margin) + 1e-12 * bound.max(1.0);
        max_violation = max_violation.max(mean - 2.0 * se - bound);
        rows.push(BoundCheckRow { time: *t, mean, se, bound, ok });
    }
    let ok = rows.iter().all(|r| r.ok);
    Ok(ContractionReport { rows, max_violation_2se: max_violation, ok })
}

// ---------------------------------------------------------------------------
// energy moments

#[derive(Debug, Clone)]
pub struct MomentReport {
    /// `None` when the linear-class hypothesis `nu > Kt3^2/(2 lambda_1)`
    /// fails; the check is then skipped rather than failed.
    pub constants: Option<MomentConstants>,
    pub skipped: Option<String>,
    pub q: f64,
    pub rows: Vec<BoundCheckRow>,
    pub mean_bound_ok: bool,
    /// Running q-th moment of `|u|_H`: (late supremum, early reference,
    /// verdict that the tail shows no growth).
    pub u_moment: (f64, f64, bool),
    /// Same for the companion `v` when the logs carry a pair.
    pub v_moment: Option<(f64, f64, bool)>,
}

impl MomentReport {
    pub fn ok(&self) -> bool {
        self.mean_bound_ok
            && self.u_moment.2
            && self.v_moment.map(|m| m.2).unwrap_or(true)
    }
}

/// Mean energy estimate and q-th-moment boundedness.
///
/// Checks, with a `2 SE` budget,
/// `mean[|u(t)|^2 + a int_0^t |u|_V^2] <= |u_0|^2 + b t` at every sample
/// time, then that the running q-th moments of `|u|_H` (and `|v|_H` for
/// pairs) show no growth over the second half of the horizon.
pub fn check_energy_moment(
    logs: &[TrajectoryLog],
    q: f64,
    ctx: &EstimateContext,
) -> Result<MomentReport, DiagError> {
    if q < 2.0 {
        return Err(DiagError::Inadmissible(format!("moment order q = {q} must be >= 2")));
    }
    let times = common_grid(logs)?;
    // a nonpositive dissipation coefficient voids the whole estimate: skip
    // with a note rather than fail
    let constants = match moment_constants(ctx) {
        Ok(c) => c,
        Err(DiagError::NotApplicable(reason)) => {
            return Ok(MomentReport {
                constants: None,
                skipped: Some(reason),
                q,
                rows: Vec::new(),
                mean_bound_ok: true,
                u_moment: (f64::NAN, f64::NAN, true),
                v_moment: None,
            });
        }
        Err(e) => return Err(e),
    };
    if let ClassBound::Linear { k3_tilde, .. } = ctx.class_bound() {
        let q_max = 1.0 + 2.0 * ctx.nu * ctx.lambda_1 / (k3_tilde * k3_tilde);
        if q >= q_max {
            return Err(DiagError::Inadmissible(format!(
                "linear class admits moment orders q in [2, {q_max:.6}), got q = {q}"
            )));
        }
    }

    let mut rows = Vec::with_capacity(times.len());
    let mut column = vec![0.0; logs.len()];
    let mut ok_all = true;
    for (i, t) in times.iter().enumerate() {
        for (slot, log) in column.iter_mut().zip(logs) {
            *slot = log.u_h2[i] + constants.a * log.accum_v_norm[i];
        }
        let (mean, se) = mean_se(&column);
        let bound = ctx.u0_h2 + constants.b * t;
        let ok = mean <= bound + 2.0 * se + 1e-12 * bound.max(1.0);
        ok_all &= ok;
        rows.push(BoundCheckRow { time: *t, mean, se, bound, ok });
    }

    let is_pair = logs.iter().any(|l| l.final_v.is_some());
    let u_moment = moment_no_growth(logs, &times, q, false);
    let v_moment = if is_pair { Some(moment_no_growth(logs, &times, q, true)) } else { None };

    Ok(MomentReport {
        constants: Some(constants),
        skipped: None,
        q,
        rows,
        mean_bound_ok: ok_all,
        u_moment,
        v_moment,
    })
}

/// Late-horizon supremum of the running q-th moment against its first-half
/// reference; growth past the error budget fails.
fn moment_no_growth(
    logs: &[TrajectoryLog],
    times: &[f64],
    q: f64,
    companion: bool,
) -> (f64, f64, bool) {
    let horizon = *times.last().unwrap();
    let half = horizon / 2.0;
    let mut column = vec![0.0; logs.len()];
    let mut early = f64::NEG_INFINITY;
    let mut late = f64::NEG_INFINITY;
    let mut late_se = 0.0;
    for (i, t) in times.iter().enumerate() {
        for (slot, log) in column.iter_mut().zip(logs) {
            let h2 = if companion { log.v_h2[i] } else { log.u_h2[i] };
            *slot = h2.powf(q / 2.0);
        }
        let (mean, se) = mean_se(&column);
        if *t <= half {
            early = early.max(mean);
        }
        if *t >= half && mean > late {
            late = mean;
            late_se = se;
        }
    }
    let ok = late <= 1.05 * early + 2.0 * late_se;
    (late, early, ok)
}

// ---------------------------------------------------------------------------
// martingale tails

/// Empirical exceedance probabilities of the recentred energy supremum.
#[derive(Debug, Clone)]
pub struct TailEstimate {
    pub thresholds: Vec<f64>,
    pub probability: Vec<f64>,
    pub radius: Vec<f64>,
    /// Closed-form bound `exp(-nu lambda_1 R / (8 K1^2))`; only the bounded
    /// class has one with computable constants.
    pub bound: Vec<Option<f64>>,
    pub ok: bool,
    /// Drift constant of the unbounded-class functional.
    pub c_b: Option<f64>,
}

/// Per-trajectory supremum of
/// `|u(t)|^2 + coef int_0^t |u|_V^2 - |u_0|^2 - drift(t)`, where
/// `coef = nu/2` and `drift = (K1^2 + |f|_{V*}^2/nu) t` for the bounded
/// class, `coef = a` and `drift = C_b (t+1)` for the unbounded ones.
pub fn estimate_tail(
    logs: &[TrajectoryLog],
    thresholds: &[f64],
    ctx: &EstimateContext,
) -> Result<TailEstimate, DiagError> {
    if thresholds.is_empty() {
        return Err(DiagError::Inadmissible("empty threshold grid".into()));
    }
    let times = common_grid(logs)?;
    let constants = moment_constants(ctx)?;
    let bounded = matches!(ctx.class_bound(), ClassBound::Bounded { .. });
    let (coef, c_b) = if bounded {
        (ctx.nu / 2.0, None)
    } else {
        (constants.a, Some(constants.c_b))
    };

    let sups: Vec<f64> = logs
        .iter()
        .map(|log| {
            let mut sup = f64::NEG_INFINITY;
            for (i, t) in times.iter().enumerate() {
                let drift = match c_b {
                    None => constants.b * t,
                    Some(cb) => cb * (t + 1.0),
                };
                let value = log.u_h2[i] + coef * log.accum_v_norm[i] - log.u_h2[0] - drift;
                sup = sup.max(value);
            }
            sup
        })
        .collect();

    let n = logs.len();
    let mut probability = Vec::with_capacity(thresholds.len());
    let mut radius = Vec::with_capacity(thresholds.len());
    let mut bound = Vec::with_capacity(thresholds.len());
    let mut ok = true;
    for &r in thresholds {
        let k = sups.iter().filter(|s| **s >= r).count();
        let p = k as f64 / n as f64;
        let rad = wilson_radius(k, n);
        let b = if bounded {
            let k1_sq = match ctx.class_bound() {
                ClassBound::Bounded { k1 } => k1 * k1,
                _ => unreachable!(),
            };
            let value = if k1_sq == 0.0 {
                if r > 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                (-ctx.nu * ctx.lambda_1 * r / (8.0 * k1_sq)).exp()
            };
            ok &= p <= value + rad + 1e-12;
            Some(value)
        } else {
            None
        };
        probability.push(p);
        radius.push(rad);
        bound.push(b);
    }
    Ok(TailEstimate { thresholds: thresholds.to_vec(), probability, radius, bound, ok, c_b })
}

// ---------------------------------------------------------------------------
// stopping probabilities

#[derive(Debug, Clone)]
pub struct StopProbReport {
    pub r: f64,
    pub beta: f64,
    pub probability: f64,
    pub radius: f64,
    pub triggered: usize,
    pub ensemble: usize,
    /// Smallest `beta` for which the class's tail estimates apply.
    pub beta_required: f64,
    pub beta_ok: bool,
    pub note: &'static str,
}

/// Empirical `P(tau_{R,beta} < horizon)` with a Wilson radius. The
/// finite-horizon estimate is a lower bound for `P(tau < infinity)` and is
/// reported as such, never extrapolated.
pub fn estimate_stop_prob(
    logs: &[TrajectoryLog],
    monitor: usize,
    r: f64,
    beta: f64,
    ctx: &EstimateContext,
) -> Result<StopProbReport, DiagError> {
    if logs.is_empty() {
        return Err(DiagError::TooFewLogs { got: 0, want: 1 });
    }
    if logs.iter().any(|l| l.tau.len() <= monitor) {
        return Err(DiagError::MissingMonitor(monitor));
    }
    let triggered = logs.iter().filter(|l| l.tau[monitor].triggered).count();
    let n = logs.len();
    let constants = moment_constants(ctx).ok();
    let beta_required = match ctx.class_bound() {
        ClassBound::Bounded { .. } => 2.0 * ctx.u0_h2 / (ctx.nu * ctx.nu),
        ClassBound::Sublinear { .. } => {
            let cb = constants.map(|c| c.c_b).unwrap_or(f64::NAN);
            (cb + ctx.u0_h2) / (ctx.nu * ctx.nu)
        }
        ClassBound::Linear { k3_tilde, .. } => {
            let cb = constants.map(|c| c.c_b).unwrap_or(f64::NAN);
            let gap = ctx.nu - k3_tilde * k3_tilde / (2.0 * ctx.lambda_1);
            (cb + ctx.u0_h2) / (ctx.nu * gap)
        }
    };
    Ok(StopProbReport {
        r,
        beta,
        probability: triggered as f64 / n as f64,
        radius: wilson_radius(triggered, n),
        triggered,
        ensemble: n,
        beta_required,
        beta_ok: beta >= beta_required,
        note: "finite-horizon estimate; lower bound for P(tau < infinity)",
    })
}

/// Conditional synchronization decay: restricted to trajectories whose tau
/// monitor never fired, the mean of `|u - v|_H^2` at time `t` must stay
/// below `e^{R + beta - nu lambda_N t / 4} |u_0 - v_0|^2` plus `2 SE`.
pub fn check_conditional_decay(
    logs: &[TrajectoryLog],
    monitor: usize,
    r: f64,
    beta: f64,
    nu: f64,
    lambda_n: f64,
) -> Result<ContractionReport, DiagError> {
    if logs.iter().any(|l| l.tau.len() <= monitor) {
        return Err(DiagError::MissingMonitor(monitor));
    }
    let survivors: Vec<&TrajectoryLog> =
        logs.iter().filter(|l| !l.tau[monitor].triggered).collect();
    if survivors.len() < 2 {
        return Err(DiagError::NotApplicable(format!(
            "only {} trajectories with tau never triggered",
            survivors.len()
        )));
    }
    let times = survivors[0].times.clone();
    let diff0 = survivors[0].diff_h2[0];
    let mut rows = Vec::with_capacity(times.len());
    let mut max_violation = f64::NEG_INFINITY;
    let mut column = vec![0.0; survivors.len()];
    for (i, t) in times.iter().enumerate() {
        for (slot, log) in column.iter_mut().zip(&survivors) {
            *slot = log.diff_h2[i];
        }
        let (mean, se) = mean_se(&column);
        let bound = (r + beta - nu * lambda_n * t / 4.0).exp() * diff0;
        let ok = mean <= bound + 2.0 * se + 1e-12 * bound.max(1.0);
        max_violation = max_violation.max(mean - 2.0 * se - bound);
        rows.push(BoundCheckRow { time: *t, mean, se, bound, ok });
    }
    let ok = rows.iter().all(|row| row.ok);
    Ok(ContractionReport { rows, max_violation_2se: max_violation, ok })
}

// ---------------------------------------------------------------------------
// deterministic scheme dissipativity

#[derive(Debug, Clone)]
pub struct EnergyBalanceReport {
    pub times: Vec<f64>,
    /// `|u(t)|^2 + 2 nu sum dt |u_k|_V^2` (right-endpoint quadrature)
    pub lhs: Vec<f64>,
    /// `|u_0|^2 + 2 sum dt <f, u_k>` (right-endpoint quadrature)
    pub rhs: Vec<f64>,
    pub max_rel_violation: f64,
    pub ok: bool,
}

/// Pathwise energy inequality of the noise-free scheme,
/// `|u(t)|^2 + 2 nu int |u|_V^2 <= |u_0|^2 + 2 int <f, u>`, checked at every
/// step with right-endpoint sums. The implicit step makes each increment
/// dissipative up to the convective coupling, which the step-size guideline
/// keeps below the tolerance.
pub fn deterministic_energy_report(
    cfg: &SimConfig,
    u0: &SpectralField,
    tol_rel: f64,
) -> Result<EnergyBalanceReport, DiagError> {
    if cfg.noise.is_some() {
        return Err(DiagError::NotApplicable(
            "energy balance check requires the noise to be off".into(),
        ));
    }
    cfg.validate()?;
    let f = &cfg.forcing;
    let mut stepper = Stepper::new(cfg);
    let mut u = u0.clone();
    let mut diss = 0.0;
    let mut work = 0.0;
    let e0 = u0.norm_h_sq();
    let mut times = vec![0.0];
    let mut lhs = vec![e0];
    let mut rhs = vec![e0];
    let mut max_rel = f64::NEG_INFINITY;
    for step in 1..=cfg.n_steps {
        let next = stepper.step_single(&u, None)?;
        diss += 2.0 * cfg.nu * cfg.dt * next.norm_v_sq();
        work += 2.0 * cfg.dt * f.inner(&next)?;
        let l = next.norm_h_sq() + diss;
        let r = e0 + work;
        let scale = e0.max(r.abs()).max(1e-300);
        max_rel = max_rel.max((l - r) / scale);
        times.push(step as f64 * cfg.dt);
        lhs.push(l);
        rhs.push(r);
        u = next;
    }
    let ok = max_rel <= tol_rel;
    Ok(EnergyBalanceReport { times, lhs, rhs, max_rel_violation: max_rel, ok })
}
