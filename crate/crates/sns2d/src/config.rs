//! INI-style experiment configuration.
//!
//! Experiments are described by text files with sections mirroring the
//! module layout (`[sim]`, `[noise]`, `[nudge]`, ...). Parsing is strict:
//! unknown sections or keys are errors, every precondition is checked at
//! load with the violated inequality spelled out, and the fully resolved
//! configuration (all defaults applied) can be rendered back to text that
//! parses to the same experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::FitModel;
use crate::dynamics::{default_nudge_gain, trajectory_rng, NudgeConfig, SimConfig, TauMonitor};
use crate::ergodicity::Regime;
use crate::noise::{GrowthClass, NoiseModel};
use crate::spectral::{Basis, SpectralField};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    FoiasProdi,
    Moments,
    Tails,
    StopProb,
    Mixing,
    CouplingProb,
    SweepN,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::FoiasProdi => "foias_prodi",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Tails => "tails",
            ExperimentKind::StopProb => "stop_prob",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::CouplingProb => "coupling_prob",
            ExperimentKind::SweepN => "sweep_n",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => ExperimentKind::Simulate,
            "foias_prodi" => ExperimentKind::FoiasProdi,
            "moments" => ExperimentKind::Moments,
            "tails" => ExperimentKind::Tails,
            "stop_prob" => ExperimentKind::StopProb,
            "mixing" => ExperimentKind::Mixing,
            "coupling_prob" => ExperimentKind::CouplingProb,
            "sweep_n" => ExperimentKind::SweepN,
            _ => return None,
        })
    }
}

/// Deterministic forcing profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    /// Amplitude on a single one-based mode index.
    Single { index: usize, amplitude: f64 },
    /// Amplitude split over the first `modes` coefficients with alternating
    /// signs, normalized so `|f|_H` equals the amplitude.
    LowShell { modes: usize, amplitude: f64 },
}

impl ForcingSpec {
    pub fn build(&self, basis: &Arc<Basis>) -> Result<SpectralField, ConfigError> {
        let dim = basis.total_dim();
        match *self {
            ForcingSpec::Zero => Ok(SpectralField::zeros(basis)),
            ForcingSpec::Single { index, amplitude } => {
                if index < 1 || index > dim {
                    return Err(ConfigError::Invalid(format!(
                        "forcing.index = {index} outside 1..={dim}"
                    )));
                }
                Ok(SpectralField::unit_mode(basis, index - 1, amplitude))
            }
            ForcingSpec::LowShell { modes, amplitude } => {
                if modes < 1 || modes > dim {
                    return Err(ConfigError::Invalid(format!(
                        "forcing.shell_modes = {modes} outside 1..={dim}"
                    )));
                }
                let a = amplitude / (modes as f64).sqrt();
                let coeffs = (0..dim)
                    .map(|j| if j < modes { if j % 2 == 0 { a } else { -a } } else { 0.0 })
                    .collect();
                Ok(SpectralField::from_coeffs(basis, coeffs).expect("length matches"))
            }
        }
    }

    fn render(&self) -> (String, f64, usize, usize) {
        match *self {
            ForcingSpec::Zero => ("zero".into(), 0.0, 1, 4),
            ForcingSpec::Single { index, amplitude } => ("single".into(), amplitude, index, 4),
            ForcingSpec::LowShell { modes, amplitude } => ("low_shell".into(), amplitude, 1, modes),
        }
    }
}

/// Initial-condition recipes; random ones derive from the experiment seed.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    /// `single:<one-based index>:<amplitude>`
    Single { index: usize, amplitude: f64 },
    /// `random:<H-norm>`: coefficients `z_j / lambda_j`, rescaled.
    Random { norm: f64 },
    /// `rough:<H-norm>`: flat-spectrum coefficients, rescaled.
    Rough { norm: f64 },
    /// `opposite`: the negation of `u0` (valid for `v0` only).
    Opposite,
}

impl InitSpec {
    fn parse(value: &str, key: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = value.split(':').collect();
        let bad = || {
            ConfigError::Invalid(format!(
                "{key} = '{value}': expected zero | single:<idx>:<amp> | random:<norm> | \
                 rough:<norm> | opposite"
            ))
        };
        match parts[0] {
            "zero" if parts.len() == 1 => Ok(InitSpec::Zero),
            "opposite" if parts.len() == 1 => Ok(InitSpec::Opposite),
            "single" if parts.len() == 3 => {
                let index = parts[1].parse().map_err(|_| bad())?;
                let amplitude = parts[2].parse().map_err(|_| bad())?;
                Ok(InitSpec::Single { index, amplitude })
            }
            "random" if parts.len() == 2 => {
                Ok(InitSpec::Random { norm: parts[1].parse().map_err(|_| bad())? })
            }
            "rough" if parts.len() == 2 => {
                Ok(InitSpec::Rough { norm: parts[1].parse().map_err(|_| bad())? })
            }
            _ => Err(bad()),
        }
    }

    fn render(&self) -> String {
        match self {
            InitSpec::Zero => "zero".into(),
            InitSpec::Single { index, amplitude } => format!("single:{index}:{amplitude}"),
            InitSpec::Random { norm } => format!("random:{norm}"),
            InitSpec::Rough { norm } => format!("rough:{norm}"),
            InitSpec::Opposite => "opposite".into(),
        }
    }

    /// `stream_tag` separates the u0 and v0 draws from every trajectory
    /// stream.
    pub fn build(
        &self,
        basis: &Arc<Basis>,
        seed: u64,
        stream_tag: u64,
        u0: Option<&SpectralField>,
    ) -> Result<SpectralField, ConfigError> {
        let dim = basis.total_dim();
        match *self {
            InitSpec::Zero => Ok(SpectralField::zeros(basis)),
            InitSpec::Single { index, amplitude } => {
                if index < 1 || index > dim {
                    return Err(ConfigError::Invalid(format!(
                        "init index {index} outside 1..={dim}"
                    )));
                }
                Ok(SpectralField::unit_mode(basis, index - 1, amplitude))
            }
            InitSpec::Random { norm } => Ok(random_field(basis, seed, stream_tag, norm, true)),
            InitSpec::Rough { norm } => Ok(random_field(basis, seed, stream_tag, norm, false)),
            InitSpec::Opposite => match u0 {
                Some(u0) => Ok(u0.scaled(-1.0)),
                None => Err(ConfigError::Invalid(
                    "init.u0 = opposite is circular; use it for v0 only".into(),
                )),
            },
        }
    }
}

fn random_field(
    basis: &Arc<Basis>,
    seed: u64,
    stream_tag: u64,
    norm: f64,
    smooth: bool,
) -> SpectralField {
    const INIT_STREAM: u64 = 0x1217;
    let mut rng = trajectory_rng(seed, INIT_STREAM, stream_tag);
    let coeffs: Vec<f64> = (0..basis.total_dim())
        .map(|j| {
            let z: f64 = rng.sample(StandardNormal);
            if smooth {
                z / basis.lambda(j)
            } else {
                z
            }
        })
        .collect();
    let mut f = SpectralField::from_coeffs(basis, coeffs).expect("length matches");
    let h = f.norm_h_sq().sqrt();
    if h > 0.0 {
        f = f.scaled(norm / h);
    }
    f
}

#[derive(Debug, Clone)]
pub struct FitParams {
    pub model: FitModel,
    pub t0: f64,
    pub t1: f64,
    pub min_r2: f64,
    pub min_drop: f64,
    pub require_positive_rate: bool,
}

#[derive(Debug, Clone)]
pub struct MixingParams {
    pub times: Vec<f64>,
    pub calibrate: bool,
    pub bootstrap: usize,
    pub floor_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct CouplingParams {
    pub epsilon: f64,
    pub m_star: usize,
    pub min_p: f64,
    /// How many trailing integer times must clear `min_p`.
    pub target_times: usize,
}

/// A fully resolved experiment: simulation config, initial data and
/// kind-specific parameters.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub regime: Option<Regime>,
    pub sim: SimConfig,
    pub u0: SpectralField,
    pub v0: Option<SpectralField>,
    pub forcing_spec: ForcingSpec,
    pub init_u0: InitSpec,
    pub init_v0: InitSpec,
    pub fit: FitParams,
    pub moments_q: Vec<f64>,
    pub tails_r: Vec<f64>,
    pub mixing: MixingParams,
    pub coupling: CouplingParams,
    pub sweep_n: Vec<usize>,
    pub checkpoint_t: Option<f64>,
    pub snapshot_times: Vec<f64>,
    noise_class_key: String,
    noise_gamma: f64,
}

struct RawConfig {
    values: BTreeMap<(String, String), (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let mut content = raw_line;
            if let Some(pos) = content.find(['#', ';']) {
                content = &content[..pos];
            }
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            if let Some(inner) = content.strip_prefix('[') {
                let inner = inner.strip_suffix(']').ok_or(ConfigError::Parse {
                    line,
                    msg: format!("unterminated section header '{content}'"),
                })?;
                section = inner.trim().to_string();
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("expected 'key = value', got '{content}'"),
                });
            };
            if section.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    msg: "key before any [section] header".into(),
                });
            }
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if values.insert((section.clone(), key.clone()), (value, line)).is_some() {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("duplicate key {section}.{key}"),
                });
            }
        }
        Ok(RawConfig { values })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.values.remove(&(section.to_string(), key.to_string())).map(|(v, _)| v)
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(((section, key), _)) = self.values.into_iter().next() {
            return Err(ConfigError::UnknownKey(format!("{section}.{key}")));
        }
        Ok(())
    }
}

fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64, ConfigError> {
    match value {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => value
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("{section}.{key} = '{value}' is not a number"))),
    }
}

fn parse_usize(section: &str, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| {
        ConfigError::Invalid(format!("{section}.{key} = '{value}' is not a nonnegative integer"))
    })
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Invalid(format!("{section}.{key} = '{value}' is not a boolean"))),
    }
}

fn parse_f64_list(section: &str, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64(section, key, s.trim()))
        .collect()
}

macro_rules! take_or {
    ($raw:expr, $sec:literal, $key:literal, $default:expr, $parser:ident) => {
        match $raw.take($sec, $key) {
            Some(v) => $parser($sec, $key, &v)?,
            None => $default,
        }
    };
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::parse(text)?;

        // [experiment]
        let name = raw.take("experiment", "name").unwrap_or_else(|| "experiment".into());
        let kind_str = raw
            .take("experiment", "kind")
            .ok_or_else(|| ConfigError::Invalid("experiment.kind is required".into()))?;
        let kind = ExperimentKind::parse(&kind_str).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "experiment.kind = '{kind_str}'; expected one of simulate, foias_prodi, \
                 moments, tails, stop_prob, mixing, coupling_prob, sweep_n"
            ))
        })?;
        let output_dir = PathBuf::from(
            raw.take("experiment", "output_dir").unwrap_or_else(|| format!("out/{name}")),
        );
        let regime = match raw.take("experiment", "regime") {
            None => None,
            Some(v) if v == "none" => None,
            Some(v) => Some(Regime::parse(&v).ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "experiment.regime = '{v}'; expected none, existence, uniqueness or stability"
                ))
            })?),
        };

        // [sim]
        let require = |raw: &mut RawConfig, key: &str| {
            raw.take("sim", key)
                .ok_or_else(|| ConfigError::Invalid(format!("sim.{key} is required")))
        };
        let kmax = parse_usize("sim", "kmax", &require(&mut raw, "kmax")?)?;
        let nu = parse_f64("sim", "nu", &require(&mut raw, "nu")?)?;
        let dt = parse_f64("sim", "dt", &require(&mut raw, "dt")?)?;
        let horizon = parse_f64("sim", "horizon", &require(&mut raw, "horizon")?)?;
        let seed = take_or!(raw, "sim", "seed", 0, parse_usize) as u64;
        let ensemble_size = take_or!(raw, "sim", "ensemble_size", 1, parse_usize);
        let sample_stride = take_or!(raw, "sim", "sample_stride", 1, parse_usize);
        let blowup_ceiling = take_or!(raw, "sim", "blowup_ceiling", 1e12, parse_f64);

        let basis = Basis::new(kmax).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let dim = basis.total_dim();
        if !(dt > 0.0) {
            return Err(ConfigError::Invalid(format!("sim.dt = {dt} must be positive")));
        }
        if !(horizon >= dt) {
            return Err(ConfigError::Invalid(format!(
                "sim.horizon = {horizon} shorter than one step (dt = {dt})"
            )));
        }
        let n_steps_f = horizon / dt;
        let n_steps = n_steps_f.round();
        if (n_steps_f - n_steps).abs() > 1e-6 {
            return Err(ConfigError::Invalid(format!(
                "sim.horizon = {horizon} is not a multiple of dt = {dt}"
            )));
        }
        let n_steps = n_steps as usize;

        // [forcing]
        let profile = raw.take("forcing", "profile").unwrap_or_else(|| "zero".into());
        let amplitude = take_or!(raw, "forcing", "amplitude", 0.0, parse_f64);
        let index = take_or!(raw, "forcing", "index", 1, parse_usize);
        let shell_modes = take_or!(raw, "forcing", "shell_modes", 4, parse_usize);
        let forcing_spec = match profile.as_str() {
            "zero" => ForcingSpec::Zero,
            "single" => ForcingSpec::Single { index, amplitude },
            "low_shell" => ForcingSpec::LowShell { modes: shell_modes, amplitude },
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "forcing.profile = '{profile}'; expected zero, single or low_shell"
                )))
            }
        };
        let forcing = forcing_spec.build(&basis)?;

        // [noise]
        let noise_class_key = raw.take("noise", "class").unwrap_or_else(|| "off".into());
        let noise_gamma = take_or!(raw, "noise", "gamma", 0.5, parse_f64);
        let noise_m = take_or!(raw, "noise", "m", 0, parse_usize);
        let k_noise = take_or!(raw, "noise", "k_noise", 0, parse_usize);
        let noise = match noise_class_key.as_str() {
            "off" => None,
            class => {
                let growth = match class {
                    "bounded" => GrowthClass::Bounded,
                    "sublinear" => GrowthClass::Sublinear,
                    "linear" => GrowthClass::Linear,
                    _ => {
                        return Err(ConfigError::Invalid(format!(
                            "noise.class = '{class}'; expected off, bounded, sublinear or linear"
                        )))
                    }
                };
                let k_resolved = if k_noise == 0 { dim } else { k_noise };
                let m_resolved = if noise_m == 0 { k_resolved } else { noise_m };
                Some(
                    NoiseModel::new(growth, noise_gamma, m_resolved, k_resolved, &basis)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                )
            }
        };

        // [nudge]
        let nudge_enabled = take_or!(raw, "nudge", "enabled", false, parse_bool);
        let nudge_n = take_or!(raw, "nudge", "n", 0, parse_usize);
        let lambda_in = take_or!(raw, "nudge", "lambda", 0.0, parse_f64);
        let girsanov_k = take_or!(raw, "nudge", "girsanov_k", f64::INFINITY, parse_f64);
        let mode = raw.take("nudge", "mode").unwrap_or_else(|| "nudged".into());
        let stop_on_sigma = match mode.as_str() {
            "nudged" => false,
            "nudged_stopped" => true,
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "nudge.mode = '{mode}'; expected nudged or nudged_stopped"
                )))
            }
        };
        if nudge_enabled && (nudge_n < 1 || nudge_n > dim) {
            return Err(ConfigError::Invalid(format!("nudge.n = {nudge_n} outside 1..={dim}")));
        }
        let lambda = if nudge_enabled && lambda_in == 0.0 {
            default_nudge_gain(nu, &basis, nudge_n)
        } else {
            lambda_in
        };
        if nudge_enabled && !(lambda > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "nudge.lambda = {lambda} must be positive when nudging is enabled"
            )));
        }
        let nudge =
            NudgeConfig { enabled: nudge_enabled, n: nudge_n, lambda, girsanov_k, stop_on_sigma };

        // [tau]
        let tau_monitors = match raw.take("tau", "monitors") {
            None => Vec::new(),
            Some(v) => {
                let mut monitors = Vec::new();
                for item in v.split(',').filter(|s| !s.trim().is_empty()) {
                    let Some((r, beta)) = item.trim().split_once(':') else {
                        return Err(ConfigError::Invalid(format!(
                            "tau.monitors entry '{item}' is not R:beta"
                        )));
                    };
                    monitors.push(TauMonitor {
                        r: parse_f64("tau", "monitors", r.trim())?,
                        beta: parse_f64("tau", "monitors", beta.trim())?,
                    });
                }
                monitors
            }
        };

        // [observables]
        let obs_modes = match raw.take("observables", "modes") {
            Some(v) if v == "auto" => auto_obs_modes(nudge_n, dim),
            Some(v) => parse_usize("observables", "modes", &v)?,
            None => auto_obs_modes(nudge_n, dim),
        };

        // [init]
        let init_u0 = match raw.take("init", "u0") {
            Some(v) => InitSpec::parse(&v, "init.u0")?,
            None => InitSpec::Zero,
        };
        let init_v0 = match raw.take("init", "v0") {
            Some(v) => InitSpec::parse(&v, "init.v0")?,
            None => InitSpec::Zero,
        };
        if init_u0 == InitSpec::Opposite {
            return Err(ConfigError::Invalid(
                "init.u0 = opposite is circular; use it for v0 only".into(),
            ));
        }

        // [fit]
        let fit_model = match raw.take("fit", "model").as_deref() {
            None | Some("exponential") => FitModel::Exponential,
            Some("polynomial") => FitModel::Polynomial,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "fit.model = '{other}'; expected exponential or polynomial"
                )))
            }
        };
        let sample_dt = dt * sample_stride as f64;
        let default_t0 = (5.0 * sample_dt).max(0.1 * horizon);
        let fit_t0 = match raw.take("fit", "t0").as_deref() {
            None | Some("auto") => default_t0,
            Some(v) => parse_f64("fit", "t0", v)?,
        };
        let fit_t1 = match raw.take("fit", "t1").as_deref() {
            None | Some("auto") => horizon,
            Some(v) => parse_f64("fit", "t1", v)?,
        };
        let fit = FitParams {
            model: fit_model,
            t0: fit_t0,
            t1: fit_t1,
            min_r2: take_or!(raw, "fit", "min_r2", 0.0, parse_f64),
            min_drop: take_or!(raw, "fit", "min_drop", 1.0, parse_f64),
            require_positive_rate: take_or!(raw, "fit", "require_positive_rate", false, parse_bool),
        };

        // [moments]
        let moments_q = match raw.take("moments", "q") {
            Some(v) => parse_f64_list("moments", "q", &v)?,
            None => vec![2.0],
        };

        // [tails]
        let tails_r = match raw.take("tails", "r_grid") {
            Some(v) => parse_f64_list("tails", "r_grid", &v)?,
            None => vec![0.5, 1.0, 2.0, 4.0, 8.0],
        };

        // [mixing]
        let mixing_times = match raw.take("mixing", "times").as_deref() {
            None | Some("auto") => {
                let mut ts = vec![0.0];
                let mut t = 1.0;
                while t <= horizon + 1e-9 {
                    ts.push(t);
                    t += 1.0;
                }
                ts
            }
            Some(v) => parse_f64_list("mixing", "times", v)?,
        };
        let mixing = MixingParams {
            times: mixing_times,
            calibrate: take_or!(raw, "mixing", "calibrate", true, parse_bool),
            bootstrap: take_or!(raw, "mixing", "bootstrap", 200, parse_usize),
            floor_sigma: take_or!(raw, "mixing", "floor_sigma", 3.0, parse_f64),
        };

        // [coupling]
        let coupling = CouplingParams {
            epsilon: take_or!(raw, "coupling", "epsilon", 0.0, parse_f64),
            m_star: take_or!(raw, "coupling", "m_star", 2, parse_usize),
            min_p: take_or!(raw, "coupling", "min_p", 0.0, parse_f64),
            target_times: take_or!(raw, "coupling", "target_times", 3, parse_usize),
        };

        // [sweep]
        let sweep_n = match raw.take("sweep", "n_values") {
            Some(v) => parse_f64_list("sweep", "n_values", &v)?
                .into_iter()
                .map(|x| x as usize)
                .collect(),
            None => Vec::new(),
        };

        // [io]
        let checkpoint_t = match raw.take("io", "checkpoint_t").as_deref() {
            None | Some("none") => None,
            Some(v) => Some(parse_f64("io", "checkpoint_t", v)?),
        };
        let snapshot_times = match raw.take("io", "snapshot_times") {
            None => Vec::new(),
            Some(v) => parse_f64_list("io", "snapshot_times", &v)?,
        };

        raw.finish()?;

        let sim = SimConfig {
            basis: Arc::clone(&basis),
            nu,
            forcing,
            dt,
            n_steps,
            seed,
            ensemble_size,
            sample_stride,
            noise,
            nudge,
            tau_monitors,
            blowup_ceiling,
            obs_modes,
        };

        let u0 = init_u0.build(&basis, seed, 1, None)?;
        let v0_field = init_v0.build(&basis, seed, 2, Some(&u0))?;
        let v0 = if needs_pair(kind) || init_v0 != InitSpec::Zero {
            Some(v0_field)
        } else {
            None
        };

        let mut spec = ExperimentSpec {
            name,
            kind,
            output_dir,
            regime,
            sim,
            u0,
            v0,
            forcing_spec,
            init_u0,
            init_v0,
            fit,
            moments_q,
            tails_r,
            mixing,
            coupling,
            sweep_n,
            checkpoint_t,
            snapshot_times,
            noise_class_key,
            noise_gamma,
        };
        spec.resolve_epsilon();
        spec.validate()?;
        Ok(spec)
    }

    fn resolve_epsilon(&mut self) {
        if self.coupling.epsilon == 0.0 {
            if let Some(v0) = &self.v0 {
                let sep = self.u0.sub(v0).map(|d| d.norm_h_sq().sqrt()).unwrap_or(0.0);
                self.coupling.epsilon = 1e-3 * sep;
            }
        }
    }

    /// Load-time validation: simulation invariants plus the chosen kind's
    /// preconditions.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        if let (Some(regime), Some(noise)) = (self.regime, &self.sim.noise) {
            crate::ergodicity::validate_regime(
                regime,
                noise.growth_constants().bound,
                self.sim.nu,
                self.sim.basis.lambda_1(),
            )
            .map_err(ConfigError::Invalid)?;
        }

        // step-size guideline including an advective estimate from the
        // initial data; violations warn, never fail
        let dx = 2.0 * std::f64::consts::PI / self.sim.basis.grid_size() as f64;
        let speed = self.u0.norm_h_sq().sqrt().max(1e-6);
        let guideline = self.sim.dt_guideline().min(0.1 * dx / speed);
        if self.sim.dt > guideline {
            eprintln!(
                "warning: sim.dt = {} exceeds the step-size guideline {:.6}",
                self.sim.dt, guideline
            );
        }

        let dim = self.sim.basis.total_dim();
        match self.kind {
            ExperimentKind::Simulate => {
                for &t in &self.snapshot_times {
                    let steps = t / self.sim.dt;
                    if (steps - steps.round()).abs() > 1e-6 || t < 0.0 || t > self.sim.horizon() {
                        return Err(ConfigError::Invalid(format!(
                            "io.snapshot_times entry {t} is not a step-grid time within the \
                             horizon"
                        )));
                    }
                }
                if let Some(t) = self.checkpoint_t {
                    if self.sim.ensemble_size != 1 {
                        return Err(ConfigError::Invalid(
                            "io.checkpoint_t requires sim.ensemble_size = 1".into(),
                        ));
                    }
                    let steps = t / self.sim.dt;
                    if (steps - steps.round()).abs() > 1e-6 || t < 0.0 || t > self.sim.horizon() {
                        return Err(ConfigError::Invalid(format!(
                            "io.checkpoint_t = {t} is not a step-grid time within the horizon"
                        )));
                    }
                }
            }
            ExperimentKind::FoiasProdi => {
                if self.v0.is_none() {
                    return Err(ConfigError::Invalid(
                        "foias_prodi needs a companion start (init.v0)".into(),
                    ));
                }
            }
            ExperimentKind::Moments | ExperimentKind::Tails => {
                for &q in &self.moments_q {
                    self.check_q_admissible(q)?;
                }
            }
            ExperimentKind::StopProb => {
                if self.sim.tau_monitors.is_empty() {
                    return Err(ConfigError::Invalid(
                        "stop_prob needs tau.monitors (R:beta pairs)".into(),
                    ));
                }
            }
            ExperimentKind::Mixing => {
                if self.v0.is_none() {
                    return Err(ConfigError::Invalid(
                        "mixing needs a second initial condition (init.v0)".into(),
                    ));
                }
                self.check_on_sample_grid(&self.mixing.times, "mixing.times")?;
            }
            ExperimentKind::CouplingProb => {
                if !self.sim.nudge.enabled {
                    return Err(ConfigError::Invalid(
                        "coupling_prob needs nudge.enabled = true".into(),
                    ));
                }
                if self.sim.noise.is_none() {
                    return Err(ConfigError::Invalid(
                        "coupling_prob needs a noise model (the shift divides by phi_j)".into(),
                    ));
                }
                if self.v0.is_none() {
                    return Err(ConfigError::Invalid(
                        "coupling_prob needs a companion start (init.v0)".into(),
                    ));
                }
                if !(self.coupling.epsilon > 0.0) {
                    return Err(ConfigError::Invalid(
                        "coupling.epsilon resolves to 0 (identical initial conditions?); set \
                         it explicitly"
                            .into(),
                    ));
                }
                let integer_times: Vec<f64> =
                    (1..=self.sim.horizon() as usize).map(|n| n as f64).collect();
                self.check_on_sample_grid(&integer_times, "integer coupling times")?;
            }
            ExperimentKind::SweepN => {
                if self.sweep_n.is_empty() {
                    return Err(ConfigError::Invalid("sweep_n needs sweep.n_values".into()));
                }
                for &n in &self.sweep_n {
                    if n < 1 || n > dim {
                        return Err(ConfigError::Invalid(format!(
                            "sweep.n_values entry {n} outside 1..={dim}"
                        )));
                    }
                    if let Some(noise) = &self.sim.noise {
                        if n > noise.m() {
                            return Err(ConfigError::Invalid(format!(
                                "sweep.n_values entry {n} > noise.m = {}: the nudged shift \
                                 requires m >= n",
                                noise.m()
                            )));
                        }
                    }
                }
                if self.v0.is_none() {
                    return Err(ConfigError::Invalid(
                        "sweep_n needs a companion start (init.v0)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_q_admissible(&self, q: f64) -> Result<(), ConfigError> {
        if q < 2.0 {
            return Err(ConfigError::Invalid(format!("moments.q = {q} must be >= 2")));
        }
        if let Some(noise) = &self.sim.noise {
            if let crate::noise::ClassBound::Linear { k3_tilde, .. } =
                noise.growth_constants().bound
            {
                let lambda_1 = self.sim.basis.lambda_1();
                // gate the order only when the dissipation threshold holds at
                // all; below it the checks skip with a note instead
                if self.sim.nu > k3_tilde * k3_tilde / (2.0 * lambda_1) {
                    let q_max = 1.0 + 2.0 * self.sim.nu * lambda_1 / (k3_tilde * k3_tilde);
                    if q >= q_max {
                        return Err(ConfigError::Invalid(format!(
                            "moments.q = {q} inadmissible for the linear class: q must lie in \
                             [2, {q_max:.6})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_on_sample_grid(&self, times: &[f64], what: &str) -> Result<(), ConfigError> {
        let sample_dt = self.sim.dt * self.sim.sample_stride as f64;
        for &t in times {
            let idx = t / sample_dt;
            if t < 0.0 || t > self.sim.horizon() + 1e-9 || (idx - idx.round()).abs() > 1e-6 {
                return Err(ConfigError::Invalid(format!(
                    "{what}: t = {t} is not on the sample grid (spacing {sample_dt})"
                )));
            }
        }
        Ok(())
    }

    /// Render the fully resolved configuration; parsing the result yields an
    /// equivalent experiment.
    pub fn resolved_ini(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# resolved configuration (all defaults applied)");
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "regime = {}", self.regime.map(|r| r.name()).unwrap_or("none"));
        let _ = writeln!(s);
        let _ = writeln!(s, "[sim]");
        let _ = writeln!(s, "kmax = {}", self.sim.basis.kmax());
        let _ = writeln!(s, "nu = {}", self.sim.nu);
        let _ = writeln!(s, "dt = {}", self.sim.dt);
        let _ = writeln!(s, "horizon = {}", self.sim.horizon());
        let _ = writeln!(s, "seed = {}", self.sim.seed);
        let _ = writeln!(s, "ensemble_size = {}", self.sim.ensemble_size);
        let _ = writeln!(s, "sample_stride = {}", self.sim.sample_stride);
        let _ = writeln!(s, "blowup_ceiling = {}", self.sim.blowup_ceiling);
        let _ = writeln!(s);
        let (profile, amplitude, index, shell) = self.forcing_spec.render();
        let _ = writeln!(s, "[forcing]");
        let _ = writeln!(s, "profile = {profile}");
        let _ = writeln!(s, "amplitude = {amplitude}");
        let _ = writeln!(s, "index = {index}");
        let _ = writeln!(s, "shell_modes = {shell}");
        let _ = writeln!(s);
        let _ = writeln!(s, "[noise]");
        let _ = writeln!(s, "class = {}", self.noise_class_key);
        let _ = writeln!(s, "gamma = {}", self.noise_gamma);
        let _ = writeln!(s, "m = {}", self.sim.noise.as_ref().map(|n| n.m()).unwrap_or(0));
        let _ = writeln!(
            s,
            "k_noise = {}",
            self.sim.noise.as_ref().map(|n| n.k_noise()).unwrap_or(0)
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "[nudge]");
        let _ = writeln!(s, "enabled = {}", self.sim.nudge.enabled);
        let _ = writeln!(s, "n = {}", self.sim.nudge.n);
        let _ = writeln!(s, "lambda = {}", self.sim.nudge.lambda);
        let _ = writeln!(
            s,
            "girsanov_k = {}",
            if self.sim.nudge.girsanov_k.is_finite() {
                self.sim.nudge.girsanov_k.to_string()
            } else {
                "inf".into()
            }
        );
        let _ = writeln!(
            s,
            "mode = {}",
            if self.sim.nudge.stop_on_sigma { "nudged_stopped" } else { "nudged" }
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "[tau]");
        let monitors = self
            .sim
            .tau_monitors
            .iter()
            .map(|m| format!("{}:{}", m.r, m.beta))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(s, "monitors = {monitors}");
        let _ = writeln!(s);
        let _ = writeln!(s, "[observables]");
        let _ = writeln!(s, "modes = {}", self.sim.obs_modes);
        let _ = writeln!(s);
        let _ = writeln!(s, "[init]");
        let _ = writeln!(s, "u0 = {}", self.init_u0.render());
        let _ = writeln!(s, "v0 = {}", self.init_v0.render());
        let _ = writeln!(s);
        let _ = writeln!(s, "[fit]");
        let _ = writeln!(s, "model = {}", self.fit.model.name());
        let _ = writeln!(s, "t0 = {}", self.fit.t0);
        let _ = writeln!(s, "t1 = {}", self.fit.t1);
        let _ = writeln!(s, "min_r2 = {}", self.fit.min_r2);
        let _ = writeln!(s, "min_drop = {}", self.fit.min_drop);
        let _ = writeln!(s, "require_positive_rate = {}", self.fit.require_positive_rate);
        let _ = writeln!(s);
        let _ = writeln!(s, "[moments]");
        let _ = writeln!(s, "q = {}", join_f64(&self.moments_q));
        let _ = writeln!(s);
        let _ = writeln!(s, "[tails]");
        let _ = writeln!(s, "r_grid = {}", join_f64(&self.tails_r));
        let _ = writeln!(s);
        let _ = writeln!(s, "[mixing]");
        let _ = writeln!(s, "times = {}", join_f64(&self.mixing.times));
        let _ = writeln!(s, "calibrate = {}", self.mixing.calibrate);
        let _ = writeln!(s, "bootstrap = {}", self.mixing.bootstrap);
        let _ = writeln!(s, "floor_sigma = {}", self.mixing.floor_sigma);
        let _ = writeln!(s);
        let _ = writeln!(s, "[coupling]");
        let _ = writeln!(s, "epsilon = {}", self.coupling.epsilon);
        let _ = writeln!(s, "m_star = {}", self.coupling.m_star);
        let _ = writeln!(s, "min_p = {}", self.coupling.min_p);
        let _ = writeln!(s, "target_times = {}", self.coupling.target_times);
        let _ = writeln!(s);
        let _ = writeln!(s, "[sweep]");
        let _ = writeln!(
            s,
            "n_values = {}",
            self.sweep_n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "[io]");
        let _ = writeln!(
            s,
            "checkpoint_t = {}",
            self.checkpoint_t.map(|t| t.to_string()).unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(s, "snapshot_times = {}", join_f64(&self.snapshot_times));
        s
    }

    /// Hex SHA-256 prefix of the resolved configuration; embedded in every
    /// report.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.resolved_ini().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn auto_obs_modes(nudge_n: usize, dim: usize) -> usize {
    if nudge_n > 0 {
        (2 * nudge_n).min(dim)
    } else {
        8.min(dim)
    }
}

fn needs_pair(kind: ExperimentKind) -> bool {
    matches!(
        kind,
        ExperimentKind::FoiasProdi | ExperimentKind::CouplingProb | ExperimentKind::SweepN
    )
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}
