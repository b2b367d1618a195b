//! Empirical measures of the Markov dynamics and distances between them.
//!
//! Laws are represented by observable samples (energy, enstrophy, leading
//! mode coefficients), either along one trajectory (time averages, the
//! Krylov-Bogoliubov construction) or across an ensemble at a fixed time.
//! The dual-Lipschitz distance is approximated from BELOW by a declared
//! finite test class of the form `u -> tanh(c (o_i(u) - theta)) / 2`, with
//! scales clamped so every member has bounded-Lipschitz norm at most 1 over
//! the sampled region; the report never claims an upper bound. Scalar
//! observables additionally get their exact empirical 1-Wasserstein
//! distance.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagnostics::{mean_se, wilson_radius, DiagError};
use crate::dynamics::{run_ensemble_stream, SimConfig, SimError, TrajectoryLog};
use crate::noise::ClassBound;
use crate::spectral::SpectralField;

#[derive(Debug, Error)]
pub enum ErgoError {
    #[error("need at least {want} samples for a distance computation, got {got}")]
    TooFewSamples { got: usize, want: usize },
    #[error("observable schemas differ: {0}")]
    SchemaMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time {0} is not on the sample grid")]
    OffGrid(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Diag(#[from] DiagError),
}

pub const MIN_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    TimeAverage { burn_in: f64, stride: f64 },
    EnsembleAt { t: f64 },
}

/// A sample cloud in observable space standing in for a law on state space.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    pub schema: Vec<String>,
    /// One row per sample, aligned with `schema`.
    pub samples: Vec<Vec<f64>>,
    pub kind: MeasureKind,
    /// Largest Stokes eigenvalue of the truncation; converts enstrophy
    /// increments into H-norm Lipschitz constants.
    pub lambda_max: f64,
    /// Identifies the generating run: resolved-config hash and seed.
    pub provenance: (String, u64),
}

fn observable_schema(log: &TrajectoryLog) -> Vec<String> {
    let mut schema = vec!["u_h2".to_string(), "u_v2".to_string()];
    let n_modes = log.obs.first().map(|row| row.len()).unwrap_or(0);
    for j in 1..=n_modes {
        schema.push(format!("mode_{j}"));
    }
    schema
}

fn observable_row(log: &TrajectoryLog, i: usize) -> Vec<f64> {
    let mut row = vec![log.u_h2[i], log.u_v2[i]];
    if let Some(obs) = log.obs.get(i) {
        row.extend_from_slice(obs);
    }
    row
}

/// Krylov-Bogoliubov style time-average samples from one trajectory:
/// observables at `burn_in + k * stride`.
pub fn time_average_measure(
    log: &TrajectoryLog,
    burn_in: f64,
    stride: f64,
    lambda_max: f64,
    provenance: (String, u64),
) -> Result<EmpiricalMeasure, ErgoError> {
    let horizon = *log.times.last().unwrap_or(&0.0);
    if burn_in >= horizon {
        return Err(ErgoError::InvalidParameter(format!(
            "burn_in = {burn_in} must be below the horizon {horizon}"
        )));
    }
    let sample_dt = log.dt * log.sample_stride as f64;
    let stride_idx = (stride / sample_dt).round();
    if stride_idx < 1.0 || (stride_idx * sample_dt - stride).abs() > 1e-9 * stride.max(1.0) {
        return Err(ErgoError::OffGrid(stride));
    }
    let stride_idx = stride_idx as usize;
    let start = log
        .times
        .iter()
        .position(|t| *t >= burn_in - 1e-12)
        .ok_or_else(|| ErgoError::InvalidParameter("burn_in beyond the log".into()))?;
    let mut samples = Vec::new();
    let mut i = start;
    while i < log.times.len() {
        samples.push(observable_row(log, i));
        i += stride_idx;
    }
    if samples.len() < MIN_SAMPLES {
        return Err(ErgoError::TooFewSamples { got: samples.len(), want: MIN_SAMPLES });
    }
    Ok(EmpiricalMeasure {
        schema: observable_schema(log),
        samples,
        kind: MeasureKind::TimeAverage { burn_in, stride },
        lambda_max,
        provenance,
    })
}

/// Ensemble law at a fixed time: one observable row per trajectory.
pub fn ensemble_at(
    logs: &[TrajectoryLog],
    t: f64,
    lambda_max: f64,
    provenance: (String, u64),
) -> Result<EmpiricalMeasure, ErgoError> {
    if logs.len() < MIN_SAMPLES {
        return Err(ErgoError::TooFewSamples { got: logs.len(), want: MIN_SAMPLES });
    }
    let mut samples = Vec::with_capacity(logs.len());
    for log in logs {
        let i = log.sample_index_at(t).ok_or(ErgoError::OffGrid(t))?;
        samples.push(observable_row(log, i));
    }
    Ok(EmpiricalMeasure {
        schema: observable_schema(&logs[0]),
        samples,
        kind: MeasureKind::EnsembleAt { t },
        lambda_max,
        provenance,
    })
}

/// One distance evaluation between two sample clouds.
#[derive(Debug, Clone)]
pub struct DistanceEntry {
    /// Lower-bound estimate of the dual-Lipschitz distance over the
    /// declared test class.
    pub dl_lower_bound: f64,
    /// Bootstrap standard deviation of the lower bound.
    pub dl_se: f64,
    /// Exact empirical 1-Wasserstein distance per scalar observable.
    pub w1: Vec<f64>,
    pub n_a: usize,
    pub n_b: usize,
}

struct TestClass {
    /// (observable index, shift, scale)
    members: Vec<(usize, f64, f64)>,
}

impl TestClass {
    /// Shift grid: pooled deciles. Scale grid: fractions of the largest
    /// scale that keeps the member 1-bounded-Lipschitz in the state norm
    /// over the sampled region (coordinates are 1-Lipschitz; energy-type
    /// observables pick up twice the largest sampled amplitude).
    fn build(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Self {
        let n_obs = a.schema.len();
        let mut members = Vec::new();
        for i in 0..n_obs {
            let mut pooled: Vec<f64> = a
                .samples
                .iter()
                .chain(b.samples.iter())
                .map(|row| row[i])
                .collect();
            pooled.sort_by(f64::total_cmp);
            let lip = match a.schema[i].as_str() {
                "u_h2" => 2.0 * pooled.last().unwrap().max(0.0).sqrt(),
                "u_v2" => 2.0 * pooled.last().unwrap().max(0.0).sqrt() * a.lambda_max.sqrt(),
                _ => 1.0,
            };
            let c_max = 1.0 / lip.max(1e-12);
            // deciles plus the midrange, which separates detached clusters
            let mut thetas: Vec<f64> =
                (1..=9).map(|q| pooled[(q * (pooled.len() - 1)) / 10]).collect();
            thetas.push((pooled[0] + pooled[pooled.len() - 1]) / 2.0);
            for theta in thetas {
                for c in [0.25 * c_max, 0.5 * c_max, c_max] {
                    members.push((i, theta, c));
                }
            }
        }
        TestClass { members }
    }

    fn evaluate(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let mut best = 0.0_f64;
        for &(i, theta, c) in &self.members {
            let ma = a.iter().map(|row| 0.5 * (c * (row[i] - theta)).tanh()).sum::<f64>()
                / a.len() as f64;
            let mb = b.iter().map(|row| 0.5 * (c * (row[i] - theta)).tanh()).sum::<f64>()
                / b.len() as f64;
            best = best.max((ma - mb).abs());
        }
        best
    }
}

/// Lower bound of the dual-Lipschitz distance over the declared test class,
/// with a bootstrap standard error, plus exact scalar 1-Wasserstein
/// distances per observable.
pub fn dual_lipschitz_lb(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    bootstrap: usize,
    boot_seed: u64,
) -> Result<DistanceEntry, ErgoError> {
    if a.schema != b.schema {
        return Err(ErgoError::SchemaMismatch(format!("{:?} vs {:?}", a.schema, b.schema)));
    }
    if a.samples.len() < MIN_SAMPLES || b.samples.len() < MIN_SAMPLES {
        return Err(ErgoError::TooFewSamples {
            got: a.samples.len().min(b.samples.len()),
            want: MIN_SAMPLES,
        });
    }
    let class = TestClass::build(a, b);
    let point = class.evaluate(&a.samples, &b.samples);

    let mut rng = ChaCha8Rng::from_seed(crate::dynamics::derive_seed(boot_seed, 0xB007, 0));
    let mut replicas = Vec::with_capacity(bootstrap);
    let mut res_a: Vec<Vec<f64>> = Vec::with_capacity(a.samples.len());
    let mut res_b: Vec<Vec<f64>> = Vec::with_capacity(b.samples.len());
    for _ in 0..bootstrap {
        res_a.clear();
        res_b.clear();
        for _ in 0..a.samples.len() {
            res_a.push(a.samples[rng.random_range(0..a.samples.len())].clone());
        }
        for _ in 0..b.samples.len() {
            res_b.push(b.samples[rng.random_range(0..b.samples.len())].clone());
        }
        replicas.push(class.evaluate(&res_a, &res_b));
    }
    let dl_se = if bootstrap >= 2 {
        // mean_se returns std/sqrt(n); the bootstrap SE is the replica std
        let (_, se) = mean_se(&replicas);
        se * (bootstrap as f64).sqrt()
    } else {
        0.0
    };

    let w1 = (0..a.schema.len())
        .map(|i| sliced_w1(a, b, i).expect("schemas already checked"))
        .collect();
    Ok(DistanceEntry {
        dl_lower_bound: point,
        dl_se,
        w1,
        n_a: a.samples.len(),
        n_b: b.samples.len(),
    })
}

/// Exact 1-Wasserstein distance between the two scalar empirical laws of
/// observable `obs`: the area between the empirical CDFs.
pub fn sliced_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure, obs: usize) -> Result<f64, ErgoError> {
    if obs >= a.schema.len() || obs >= b.schema.len() {
        return Err(ErgoError::InvalidParameter(format!("observable index {obs}")));
    }
    if a.samples.is_empty() || b.samples.is_empty() {
        return Err(ErgoError::TooFewSamples { got: 0, want: 1 });
    }
    let mut xs: Vec<f64> = a.samples.iter().map(|r| r[obs]).collect();
    let mut ys: Vec<f64> = b.samples.iter().map(|r| r[obs]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut dist = 0.0;
    let mut prev = f64::NAN;
    while i < xs.len() || j < ys.len() {
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        if prev.is_finite() && x > prev {
            let fa = i as f64 / na;
            let fb = j as f64 / nb;
            dist += (fa - fb).abs() * (x - prev);
        }
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        prev = x;
    }
    Ok(dist)
}

/// Distances between two independently forced ensembles over a time grid:
/// the empirical surrogate of the laws started at `u0` and `v0` approaching
/// each other. Streams must differ so the ensembles see independent noise.
pub fn mixing_experiment(
    cfg: &SimConfig,
    u0: &SpectralField,
    v0: &SpectralField,
    times: &[f64],
    streams: (u64, u64),
    bootstrap: usize,
) -> Result<Vec<(f64, DistanceEntry)>, ErgoError> {
    if streams.0 == streams.1 {
        return Err(ErgoError::InvalidParameter(
            "mixing ensembles need distinct noise streams".into(),
        ));
    }
    let logs_a = run_ensemble_stream(cfg, u0, None, streams.0)?;
    let logs_b = run_ensemble_stream(cfg, v0, None, streams.1)?;
    let lambda_max = cfg.basis.lambda_max();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let ma = ensemble_at(&logs_a, t, lambda_max, ("ensemble_a".into(), cfg.seed))?;
        let mb = ensemble_at(&logs_b, t, lambda_max, ("ensemble_b".into(), cfg.seed))?;
        let entry = dual_lipschitz_lb(&ma, &mb, bootstrap, cfg.seed ^ t.to_bits())?;
        out.push((t, entry));
    }
    Ok(out)
}

/// Empirical synchronization probabilities of the nudged coupling.
#[derive(Debug, Clone)]
pub struct CouplingReport {
    /// Integer times with `P(|u(n) - v(n)|_H <= eps)` and Wilson radii.
    pub times: Vec<f64>,
    pub probability: Vec<f64>,
    pub radius: Vec<f64>,
    /// Fraction of trajectories with
    /// `|u(n)-v(n)|^2 + int_n^{n+1} |P_N(u-v)|^2 <= 1/n^2` for every integer
    /// `n >= m_star` inside the horizon.
    pub event_fraction: f64,
    /// Fraction of trajectories whose sigma stopping time never fired.
    pub sigma_clear_fraction: f64,
    pub eps: f64,
    pub m_star: usize,
    pub ensemble: usize,
}

pub fn coupling_probability(
    cfg: &SimConfig,
    u0: &SpectralField,
    v0: &SpectralField,
    eps: f64,
    m_star: usize,
) -> Result<CouplingReport, ErgoError> {
    if !cfg.nudge.enabled {
        return Err(ErgoError::InvalidParameter(
            "coupling probabilities need the nudged (or nudged-stopped) mode".into(),
        ));
    }
    let logs = run_ensemble_stream(cfg, u0, Some(v0), 0)?;
    coupling_report_from_logs(&logs, eps, m_star)
}

pub fn coupling_report_from_logs(
    logs: &[TrajectoryLog],
    eps: f64,
    m_star: usize,
) -> Result<CouplingReport, ErgoError> {
    if !(eps > 0.0) {
        return Err(ErgoError::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    if logs.is_empty() {
        return Err(ErgoError::TooFewSamples { got: 0, want: 1 });
    }
    let horizon = *logs[0].times.last().unwrap();
    let n_max = (horizon + 1e-9).floor() as usize;
    let eps_sq = eps * eps;
    let mut times = Vec::new();
    let mut probability = Vec::new();
    let mut radius = Vec::new();
    for n in 1..=n_max {
        let t = n as f64;
        let idx = logs[0]
            .sample_index_at(t)
            .ok_or(ErgoError::OffGrid(t))?;
        let k = logs.iter().filter(|l| l.diff_h2[idx] <= eps_sq).count();
        times.push(t);
        probability.push(k as f64 / logs.len() as f64);
        radius.push(wilson_radius(k, logs.len()));
    }

    let mut event_ok = 0usize;
    for log in logs {
        let mut ok = true;
        for n in m_star.max(1)..n_max {
            let t = n as f64;
            let (Some(i0), Some(i1)) = (log.sample_index_at(t), log.sample_index_at(t + 1.0))
            else {
                ok = false;
                break;
            };
            let window = log.diff_h2[i0] + (log.accum_lowdiff[i1] - log.accum_lowdiff[i0]);
            if window > 1.0 / (t * t) {
                ok = false;
                break;
            }
        }
        if ok {
            event_ok += 1;
        }
    }
    let sigma_clear = logs.iter().filter(|l| !l.sigma.triggered).count();
    Ok(CouplingReport {
        times,
        probability,
        radius,
        event_fraction: event_ok as f64 / logs.len() as f64,
        sigma_clear_fraction: sigma_clear as f64 / logs.len() as f64,
        eps,
        m_star,
        ensemble: logs.len(),
    })
}

/// Viscosity regimes of the linear noise class: existence, uniqueness and
/// stability of the invariant law demand strictly increasing dissipation
/// thresholds `Kt3^2 / (2 lambda_1) * {1, 3, 11}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Existence,
    Uniqueness,
    Stability,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Existence => "existence",
            Regime::Uniqueness => "uniqueness",
            Regime::Stability => "stability",
        }
    }

    pub fn multiplier(&self) -> f64 {
        match self {
            Regime::Existence => 1.0,
            Regime::Uniqueness => 3.0,
            Regime::Stability => 11.0,
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "existence" => Some(Regime::Existence),
            "uniqueness" => Some(Regime::Uniqueness),
            "stability" => Some(Regime::Stability),
            _ => None,
        }
    }
}

/// Canonical threshold `multiplier * Kt3^2 / (2 lambda_1)`; the single
/// expression both validation and callers evaluate, so acceptance is exact
/// at the ulp level.
pub fn regime_threshold(regime: Regime, k3_tilde: f64, lambda_1: f64) -> f64 {
    regime.multiplier() * (k3_tilde * k3_tilde) / (2.0 * lambda_1)
}

/// Validate a regime tag against the truncated constants. Only the linear
/// class carries a viscosity condition, and the inequality is strict.
pub fn validate_regime(
    regime: Regime,
    bound: ClassBound,
    nu: f64,
    lambda_1: f64,
) -> Result<(), String> {
    if let ClassBound::Linear { k3_tilde, .. } = bound {
        let threshold = regime_threshold(regime, k3_tilde, lambda_1);
        if !(nu > threshold) {
            return Err(format!(
                "regime '{}' requires nu > {} * Kt3^2 / (2 lambda_1) = {:.12}, got nu = {:.12}",
                regime.name(),
                regime.multiplier(),
                threshold,
                nu
            ));
        }
    }
    Ok(())
}
