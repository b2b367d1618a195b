//! Experiment orchestration: run a parsed spec, write CSV reports and
//! checkpoints, collect check failures.
//!
//! Exit-code contract of the binary: 0 all checks passed, 2 a check failed
//! its declared margin, 3 a trajectory blew up, 4 configuration error,
//! 1 anything else. Reports embed the resolved-config hash; a rerun of the
//! same config produces byte-identical CSVs.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, ExperimentKind, ExperimentSpec};
use crate::diagnostics::{
    self, check_conditional_decay, check_energy_moment, check_weighted_contraction,
    default_fit_window, estimate_decay, estimate_stop_prob, estimate_tail, fit_decay,
    linear_class_admissible, DecayCurve, EstimateContext, FitReport,
};
use crate::dynamics::{
    run_ensemble, run_ensemble_stream, run_trajectory_from, FlagState, PairState, SimError,
    TrajectoryLog,
};
use crate::ergodicity::{coupling_report_from_logs, mixing_experiment, ErgoError};
use crate::spectral::SpectralField;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Diag(#[from] diagnostics::DiagError),
    #[error(transparent)]
    Ergo(#[from] ErgoError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 4,
            RunError::Sim(SimError::Blowup { .. }) => 3,
            RunError::Sim(SimError::Config(_)) => 4,
            RunError::Ergo(ErgoError::Sim(SimError::Blowup { .. })) => 3,
            _ => 1,
        }
    }
}

/// What a run produced: artifact paths plus any failed checks.
#[derive(Debug, Default)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

/// Execute a spec: write the resolved config, run the experiment kind,
/// write its CSV reports and evaluate the enabled checks.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport, RunError> {
    fs::create_dir_all(&spec.output_dir)?;
    let mut report = RunReport::default();
    let resolved = spec.output_dir.join("resolved.ini");
    fs::write(&resolved, spec.resolved_ini())?;
    report.artifacts.push(resolved);

    match spec.kind {
        ExperimentKind::Simulate => run_simulate(spec, &mut report)?,
        ExperimentKind::FoiasProdi => run_foias_prodi(spec, &mut report)?,
        ExperimentKind::Moments => run_moments(spec, &mut report)?,
        ExperimentKind::Tails => run_tails(spec, &mut report)?,
        ExperimentKind::StopProb => run_stop_prob(spec, &mut report)?,
        ExperimentKind::Mixing => run_mixing(spec, &mut report)?,
        ExperimentKind::CouplingProb => run_coupling(spec, &mut report)?,
        ExperimentKind::SweepN => run_sweep(spec, &mut report)?,
    }

    if !report.failures.is_empty() {
        let path = spec.output_dir.join("failures.csv");
        let mut body = String::from("check\n");
        for f in &report.failures {
            let _ = writeln!(body, "{}", f.replace(',', ";"));
        }
        write_report(&path, &spec.config_hash(), &body)?;
        report.artifacts.push(path);
    }
    Ok(report)
}

fn run_simulate(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    if let Some(ckpt_t) = spec.checkpoint_t {
        let ckpt_step = (ckpt_t / spec.sim.dt).round() as usize;
        let ckpt_path = spec.output_dir.join("checkpoint.bin");
        let start = PairState::new(
            spec.u0.clone(),
            spec.v0.clone(),
            spec.sim.tau_monitors.len(),
        );
        let mut pending: Option<(PairState, u128)> = None;
        let log =
            run_trajectory_from(&spec.sim, start, 0, 0, None, &spec.snapshot_times, |state, pos| {
                if state.step == ckpt_step {
                    pending = Some((state.clone(), pos));
                }
            })?;
        if let Some((state, pos)) = pending {
            write_checkpoint(&ckpt_path, &spec.resolved_ini(), &state, 0, 0, pos)?;
            report.artifacts.push(ckpt_path);
        }
        write_snapshots(spec, &log, report)?;
        let path = spec.output_dir.join("trajectory_0.csv");
        write_report(&path, &hash, &trajectory_csv(&log))?;
        report.artifacts.push(path);
    } else {
        let logs: Vec<TrajectoryLog> = if spec.snapshot_times.is_empty() {
            run_ensemble(&spec.sim, &spec.u0, spec.v0.as_ref())?
        } else {
            // snapshots are a single-trajectory artifact; keep the ensemble
            // path allocation-free otherwise
            (0..spec.sim.ensemble_size)
                .map(|i| {
                    let snaps: &[f64] =
                        if i == 0 { &spec.snapshot_times } else { &[] };
                    let start = PairState::new(
                        spec.u0.clone(),
                        spec.v0.clone(),
                        spec.sim.tau_monitors.len(),
                    );
                    run_trajectory_from(&spec.sim, start, i, 0, None, snaps, |_, _| {})
                })
                .collect::<Result<_, _>>()?
        };
        write_snapshots(spec, &logs[0], report)?;
        for log in &logs {
            let path = spec.output_dir.join(format!("trajectory_{}.csv", log.trajectory));
            write_report(&path, &hash, &trajectory_csv(log))?;
            report.artifacts.push(path);
        }
    }
    Ok(())
}

/// Binary field exports at the configured snapshot times.
fn write_snapshots(
    spec: &ExperimentSpec,
    log: &TrajectoryLog,
    report: &mut RunReport,
) -> Result<(), RunError> {
    for (t, u, v) in &log.snapshots {
        let path = spec.output_dir.join(format!("snapshot_t{t}_u.bin"));
        let mut buf = Vec::new();
        u.write_to(&mut buf).map_err(SimError::from)?;
        fs::write(&path, buf)?;
        report.artifacts.push(path);
        if let Some(v) = v {
            let path = spec.output_dir.join(format!("snapshot_t{t}_v.bin"));
            let mut buf = Vec::new();
            v.write_to(&mut buf).map_err(SimError::from)?;
            fs::write(&path, buf)?;
            report.artifacts.push(path);
        }
    }
    Ok(())
}

fn run_foias_prodi(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let v0 = spec.v0.as_ref().expect("validated at load");
    let logs = run_ensemble(&spec.sim, &spec.u0, Some(v0))?;
    let curve = estimate_decay(&logs)?;
    let path = spec.output_dir.join("decay.csv");
    write_report(&path, &hash, &decay_csv(&curve))?;
    report.artifacts.push(path);

    let ctx = EstimateContext::new(&spec.sim, &spec.u0);
    let window = (spec.fit.t0, spec.fit.t1);
    match fit_decay(&curve, spec.fit.model, window) {
        Ok(mut fit) => {
            fit.admissible = linear_class_admissible(&ctx, fit.rate);
            let path = spec.output_dir.join("fit.csv");
            write_report(&path, &hash, &fit_csv(&fit))?;
            report.artifacts.push(path);
            let (_, drop) = curve.peak_and_drop();
            if drop < spec.fit.min_drop {
                report
                    .failures
                    .push(format!("decay drop {drop:.3e} below fit.min_drop {}", spec.fit.min_drop));
            }
            if fit.r_squared < spec.fit.min_r2 {
                report.failures.push(format!(
                    "fit r_squared {:.4} below fit.min_r2 {}",
                    fit.r_squared, spec.fit.min_r2
                ));
            }
            if spec.fit.require_positive_rate && !(fit.rate > 0.0) {
                report.failures.push(format!("fitted rate {} not positive", fit.rate));
            }
        }
        Err(e) => report.failures.push(format!("decay fit failed: {e}")),
    }

    // conditional decay against each configured growth monitor
    for (idx, monitor) in spec.sim.tau_monitors.iter().enumerate() {
        match check_conditional_decay(
            &logs,
            idx,
            monitor.r,
            monitor.beta,
            spec.sim.nu,
            spec.sim.lambda_n(),
        ) {
            Ok(cond) => {
                let path = spec.output_dir.join(format!("conditional_decay_{idx}.csv"));
                write_report(&path, &hash, &bound_rows_csv(&cond.rows))?;
                report.artifacts.push(path);
                if !cond.ok {
                    report.failures.push(format!(
                        "conditional decay violated for monitor {idx} (R={}, beta={})",
                        monitor.r, monitor.beta
                    ));
                }
            }
            Err(diagnostics::DiagError::NotApplicable(note)) => {
                report.notes.push(format!("conditional decay monitor {idx}: {note}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn run_moments(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let logs = run_ensemble(&spec.sim, &spec.u0, spec.v0.as_ref())?;
    let ctx = EstimateContext::new(&spec.sim, &spec.u0);
    for &q in &spec.moments_q {
        let moment = check_energy_moment(&logs, q, &ctx)?;
        if let Some(note) = &moment.skipped {
            report.notes.push(format!("moment check q={q} skipped: {note}"));
            continue;
        }
        let path = spec.output_dir.join(format!("moments_q{q}.csv"));
        write_report(&path, &hash, &bound_rows_csv(&moment.rows))?;
        report.artifacts.push(path);
        if !moment.mean_bound_ok {
            report.failures.push(format!("mean energy bound violated (q={q})"));
        }
        if !moment.u_moment.2 {
            report.failures.push(format!(
                "q={q} moment of u grows: late {:.4e} vs early {:.4e}",
                moment.u_moment.0, moment.u_moment.1
            ));
        }
        if let Some((late, early, ok)) = moment.v_moment {
            if !ok {
                report
                    .failures
                    .push(format!("q={q} moment of v grows: late {late:.4e} vs early {early:.4e}"));
            }
        }
    }

    // same-noise uncontrolled pairs also admit the weighted-contraction check
    if spec.v0.is_some() && !spec.sim.nudge.enabled {
        let contraction = check_weighted_contraction(&logs, &ctx)?;
        let path = spec.output_dir.join("weighted_contraction.csv");
        write_report(&path, &hash, &bound_rows_csv(&contraction.rows))?;
        report.artifacts.push(path);
        if !contraction.ok {
            report.failures.push(format!(
                "weighted contraction violated (max 2SE excess {:.3e})",
                contraction.max_violation_2se
            ));
        }
    }
    Ok(())
}

fn run_tails(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let logs = run_ensemble(&spec.sim, &spec.u0, None)?;
    let ctx = EstimateContext::new(&spec.sim, &spec.u0);
    let est = estimate_tail(&logs, &spec.tails_r, &ctx)?;
    let mut body = String::from("r,probability,wilson_radius,bound,verdict\n");
    for i in 0..est.thresholds.len() {
        let bound = est.bound[i].map(|b| b.to_string()).unwrap_or_else(|| "".into());
        let verdict = match est.bound[i] {
            Some(b) => {
                if est.probability[i] <= b + est.radius[i] + 1e-12 {
                    "pass"
                } else {
                    "fail"
                }
            }
            None => "report_only",
        };
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            est.thresholds[i], est.probability[i], est.radius[i], bound, verdict
        );
    }
    let path = spec.output_dir.join("tails.csv");
    write_report(&path, &hash, &body)?;
    report.artifacts.push(path);
    if !est.ok {
        report.failures.push("martingale tail bound exceeded".into());
    }
    Ok(())
}

fn run_stop_prob(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let logs = run_ensemble(&spec.sim, &spec.u0, spec.v0.as_ref())?;
    let ctx = EstimateContext::new(&spec.sim, &spec.u0);
    let mut body = String::from(
        "r,beta,probability,wilson_radius,triggered,ensemble,beta_required,beta_ok,note\n",
    );
    let mut reports = Vec::new();
    for (idx, monitor) in spec.sim.tau_monitors.iter().enumerate() {
        let sp = estimate_stop_prob(&logs, idx, monitor.r, monitor.beta, &ctx)?;
        if !sp.beta_ok {
            report.notes.push(format!(
                "warning: monitor {idx} has beta = {} below the class requirement {:.6}",
                monitor.beta, sp.beta_required
            ));
        }
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},{}",
            sp.r,
            sp.beta,
            sp.probability,
            sp.radius,
            sp.triggered,
            sp.ensemble,
            sp.beta_required,
            sp.beta_ok,
            sp.note
        );
        reports.push(sp);
    }
    let path = spec.output_dir.join("stop_prob.csv");
    write_report(&path, &hash, &body)?;
    report.artifacts.push(path);

    // nested monotonicity: among monitors sharing beta, larger R cannot be
    // significantly more likely
    for i in 0..reports.len() {
        for j in 0..reports.len() {
            let (a, b) = (&reports[i], &reports[j]);
            if a.beta == b.beta && a.r < b.r {
                let slack = a.radius + b.radius;
                if b.probability > a.probability + slack {
                    report.failures.push(format!(
                        "stop probability not monotone: P(R={}) = {} vs P(R={}) = {}",
                        a.r, a.probability, b.r, b.probability
                    ));
                }
            }
        }
    }
    Ok(())
}

fn run_mixing(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let v0 = spec.v0.as_ref().expect("validated at load");
    let entries = mixing_experiment(
        &spec.sim,
        &spec.u0,
        v0,
        &spec.mixing.times,
        (1, 2),
        spec.mixing.bootstrap,
    )?;
    let n_modes = spec.sim.obs_modes;
    let path = spec.output_dir.join("mixing.csv");
    write_report(&path, &hash, &mixing_csv(&entries, n_modes))?;
    report.artifacts.push(path);

    if spec.mixing.calibrate {
        let floor = mixing_experiment(
            &spec.sim,
            &spec.u0,
            &spec.u0,
            &spec.mixing.times,
            (3, 4),
            spec.mixing.bootstrap,
        )?;
        let path = spec.output_dir.join("mixing_floor.csv");
        write_report(&path, &hash, &mixing_csv(&floor, n_modes))?;
        report.artifacts.push(path);

        let (t_last, last) = entries.last().expect("nonempty time grid");
        let (_, floor_last) = floor.last().expect("nonempty time grid");
        let sigma = spec.mixing.floor_sigma;
        let slack = sigma * (last.dl_se.powi(2) + floor_last.dl_se.powi(2)).sqrt();
        if last.dl_lower_bound > floor_last.dl_lower_bound + slack {
            report.failures.push(format!(
                "distance at t = {t_last} ({:.4}) has not reached the identical-law floor \
                 ({:.4}) within {sigma} bootstrap SE",
                last.dl_lower_bound, floor_last.dl_lower_bound
            ));
        }
        let first = &entries.first().expect("nonempty").1;
        if first.dl_lower_bound <= last.dl_lower_bound {
            report.failures.push(format!(
                "distance did not decrease: t=0 gives {:.4}, final gives {:.4}",
                first.dl_lower_bound, last.dl_lower_bound
            ));
        }
    }
    Ok(())
}

fn run_coupling(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let v0 = spec.v0.as_ref().expect("validated at load");
    let logs = run_ensemble_stream(&spec.sim, &spec.u0, Some(v0), 0)?;
    let rep = coupling_report_from_logs(&logs, spec.coupling.epsilon, spec.coupling.m_star)?;
    let mut body = String::from("n,probability,wilson_radius\n");
    for i in 0..rep.times.len() {
        let _ = writeln!(body, "{},{},{}", rep.times[i], rep.probability[i], rep.radius[i]);
    }
    let path = spec.output_dir.join("coupling.csv");
    write_report(&path, &hash, &body)?;
    report.artifacts.push(path);

    let mut summary = String::from("eps,m_star,event_fraction,sigma_clear_fraction,ensemble\n");
    let _ = writeln!(
        summary,
        "{},{},{},{},{}",
        rep.eps, rep.m_star, rep.event_fraction, rep.sigma_clear_fraction, rep.ensemble
    );
    let path = spec.output_dir.join("coupling_summary.csv");
    write_report(&path, &hash, &summary)?;
    report.artifacts.push(path);

    if spec.coupling.min_p > 0.0 {
        let tail = spec.coupling.target_times.min(rep.times.len());
        for i in rep.times.len() - tail..rep.times.len() {
            if rep.probability[i] < spec.coupling.min_p {
                report.failures.push(format!(
                    "coupling probability {} at n = {} below coupling.min_p {}",
                    rep.probability[i], rep.times[i], spec.coupling.min_p
                ));
            }
        }
    }
    Ok(())
}

fn run_sweep(spec: &ExperimentSpec, report: &mut RunReport) -> Result<(), RunError> {
    let hash = spec.config_hash();
    let v0 = spec.v0.as_ref().expect("validated at load");
    let mut body = String::from("n,lambda,drop_factor,rate,r_squared,decayed\n");
    let mut smallest: Option<usize> = None;
    for &n in &spec.sweep_n {
        let mut cfg = spec.sim.clone();
        cfg.nudge.enabled = true;
        cfg.nudge.n = n;
        cfg.nudge.lambda = crate::dynamics::default_nudge_gain(cfg.nu, &cfg.basis, n);
        let logs = run_ensemble(&cfg, &spec.u0, Some(v0))?;
        let curve = estimate_decay(&logs)?;
        let (_, drop) = curve.peak_and_drop();
        let window = default_fit_window(&curve.times);
        let (rate, r2) = match fit_decay(&curve, spec.fit.model, window) {
            Ok(fit) => (fit.rate, fit.r_squared),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let decayed = drop >= spec.fit.min_drop.max(10.0) && rate > 0.0;
        if decayed && smallest.is_none() {
            smallest = Some(n);
        }
        let _ = writeln!(body, "{},{},{},{},{},{}", n, cfg.nudge.lambda, drop, rate, r2, decayed);
    }
    let _ = writeln!(
        body,
        "# smallest_decaying_n = {}",
        smallest.map(|n| n.to_string()).unwrap_or_else(|| "none".into())
    );
    let path = spec.output_dir.join("sweep.csv");
    write_report(&path, &hash, &body)?;
    report.artifacts.push(path);
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV rendering

/// All quantities are dimensionless (2pi-periodic torus, unit density).
fn write_report(path: &Path, hash: &str, body: &str) -> Result<(), RunError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config_hash={hash} units=dimensionless")?;
    file.write_all(body.as_bytes())?;
    Ok(())
}

fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut s = String::from(
        "time,u_h2,u_v2,v_h2,diff_h2,lowdiff_h2,accum_v_norm,accum_lowdiff,accum_shift,sigma",
    );
    for i in 0..log.tau_flags.len() {
        let _ = write!(s, ",tau_{i}");
    }
    s.push('\n');
    for i in 0..log.len() {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            log.times[i],
            log.u_h2[i],
            log.u_v2[i],
            log.v_h2[i],
            log.diff_h2[i],
            log.lowdiff_h2[i],
            log.accum_v_norm[i],
            log.accum_lowdiff[i],
            log.accum_shift[i],
            log.sigma_flag[i] as u8
        );
        for series in &log.tau_flags {
            let _ = write!(s, ",{}", series[i] as u8);
        }
        s.push('\n');
    }
    s
}

fn decay_csv(curve: &DecayCurve) -> String {
    let mut s = String::from("time,mean_diff_h2,se,ensemble\n");
    for i in 0..curve.times.len() {
        let _ = writeln!(s, "{},{},{},{}", curve.times[i], curve.mean[i], curve.se[i], curve.ensemble);
    }
    s
}

fn fit_csv(fit: &FitReport) -> String {
    let mut s = String::from(
        "model,rate,log_prefactor,t0,t1,r_squared,points,admissible_lo,admissible_hi,admissible_ok\n",
    );
    let (lo, hi, ok) = match fit.admissible {
        Some((lo, hi, ok)) => (lo.to_string(), hi.to_string(), ok.to_string()),
        None => ("".into(), "".into(), "".into()),
    };
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{},{},{},{}",
        fit.model.name(),
        fit.rate,
        fit.log_prefactor,
        fit.window.0,
        fit.window.1,
        fit.r_squared,
        fit.points,
        lo,
        hi,
        ok
    );
    s
}

fn bound_rows_csv(rows: &[diagnostics::BoundCheckRow]) -> String {
    let mut s = String::from("time,mean,se,bound,verdict\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.time,
            r.mean,
            r.se,
            r.bound,
            if r.ok { "pass" } else { "fail" }
        );
    }
    s
}

fn mixing_csv(entries: &[(f64, crate::ergodicity::DistanceEntry)], n_modes: usize) -> String {
    let mut s = String::from("time,dl_lower_bound,dl_se,w1_energy,w1_enstrophy");
    for j in 1..=n_modes {
        let _ = write!(s, ",w1_mode_{j}");
    }
    s.push_str(",n_samples\n");
    for (t, e) in entries {
        let _ = write!(s, "{},{},{}", t, e.dl_lower_bound, e.dl_se);
        for w in &e.w1 {
            let _ = write!(s, ",{w}");
        }
        let _ = writeln!(s, ",{}", e.n_a.min(e.n_b));
    }
    s
}

// ---------------------------------------------------------------------------
// checkpointing

const CHECKPOINT_MAGIC: &[u8; 8] = b"SNS2DCK1";

/// Binary checkpoint: magic, embedded resolved config, trajectory/stream
/// ids, step index, noise-stream position, both fields, accumulators and
/// stopping flags. Everything little-endian.
pub fn write_checkpoint(
    path: &Path,
    resolved_ini: &str,
    state: &PairState,
    trajectory: u32,
    stream: u64,
    word_pos: u128,
) -> Result<(), RunError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    let ini = resolved_ini.as_bytes();
    buf.extend_from_slice(&(ini.len() as u32).to_le_bytes());
    buf.extend_from_slice(ini);
    buf.extend_from_slice(&trajectory.to_le_bytes());
    buf.extend_from_slice(&stream.to_le_bytes());
    buf.extend_from_slice(&(state.step as u64).to_le_bytes());
    buf.extend_from_slice(&word_pos.to_le_bytes());
    state.u.write_to(&mut buf).map_err(SimError::from)?;
    match &state.v {
        Some(v) => {
            buf.push(1);
            v.write_to(&mut buf).map_err(SimError::from)?;
        }
        None => buf.push(0),
    }
    buf.extend_from_slice(&state.accum_v_norm.to_le_bytes());
    buf.extend_from_slice(&state.accum_lowdiff.to_le_bytes());
    buf.extend_from_slice(&state.accum_shift.to_le_bytes());
    buf.push(state.sigma.triggered as u8);
    buf.extend_from_slice(&state.sigma.time.to_le_bytes());
    buf.extend_from_slice(&(state.tau.len() as u32).to_le_bytes());
    for flag in &state.tau {
        buf.push(flag.triggered as u8);
        buf.extend_from_slice(&flag.time.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// A checkpoint read back: the embedded spec plus everything needed to
/// continue the trajectory bitwise.
pub struct Resume {
    pub spec: ExperimentSpec,
    pub state: PairState,
    pub trajectory: u32,
    pub stream: u64,
    pub word_pos: u128,
}

pub fn read_checkpoint(path: &Path) -> Result<Resume, RunError> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(RunError::Checkpoint("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b16 = [0u8; 16];
    file.read_exact(&mut b4)?;
    let ini_len = u32::from_le_bytes(b4) as usize;
    let mut ini = vec![0u8; ini_len];
    file.read_exact(&mut ini)?;
    let ini = String::from_utf8(ini).map_err(|e| RunError::Checkpoint(e.to_string()))?;
    let spec = ExperimentSpec::parse(&ini)?;
    file.read_exact(&mut b4)?;
    let trajectory = u32::from_le_bytes(b4);
    file.read_exact(&mut b8)?;
    let stream = u64::from_le_bytes(b8);
    file.read_exact(&mut b8)?;
    let step = u64::from_le_bytes(b8) as usize;
    file.read_exact(&mut b16)?;
    let word_pos = u128::from_le_bytes(b16);
    let u = SpectralField::read_from(&mut file, &spec.sim.basis).map_err(SimError::from)?;
    let mut b1 = [0u8; 1];
    file.read_exact(&mut b1)?;
    let v = if b1[0] == 1 {
        Some(SpectralField::read_from(&mut file, &spec.sim.basis).map_err(SimError::from)?)
    } else {
        None
    };
    file.read_exact(&mut b8)?;
    let accum_v_norm = f64::from_le_bytes(b8);
    file.read_exact(&mut b8)?;
    let accum_lowdiff = f64::from_le_bytes(b8);
    file.read_exact(&mut b8)?;
    let accum_shift = f64::from_le_bytes(b8);
    file.read_exact(&mut b1)?;
    let sigma_triggered = b1[0] == 1;
    file.read_exact(&mut b8)?;
    let sigma_time = f64::from_le_bytes(b8);
    file.read_exact(&mut b4)?;
    let n_tau = u32::from_le_bytes(b4) as usize;
    let mut tau = Vec::with_capacity(n_tau);
    for _ in 0..n_tau {
        file.read_exact(&mut b1)?;
        let triggered = b1[0] == 1;
        file.read_exact(&mut b8)?;
        tau.push(FlagState { triggered, time: f64::from_le_bytes(b8) });
    }
    let state = PairState {
        step,
        u,
        v,
        accum_v_norm,
        accum_lowdiff,
        accum_shift,
        sigma: FlagState { triggered: sigma_triggered, time: sigma_time },
        tau,
    };
    Ok(Resume { spec, state, trajectory, stream, word_pos })
}

/// Continue a checkpointed run to the configured horizon; the resumed
/// samples reproduce an uninterrupted run bitwise.
pub fn resume(path: &Path) -> Result<RunReport, RunError> {
    let resume = read_checkpoint(path)?;
    let spec = &resume.spec;
    fs::create_dir_all(&spec.output_dir)?;
    let mut report = RunReport::default();
    let log = run_trajectory_from(
        &spec.sim,
        resume.state,
        resume.trajectory as usize,
        resume.stream,
        Some(resume.word_pos),
        &[],
        |_, _| {},
    )?;
    let out = spec.output_dir.join(format!("trajectory_{}_resumed.csv", resume.trajectory));
    write_report(&out, &spec.config_hash(), &trajectory_csv(&log))?;
    report.artifacts.push(out);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simulate_spec(dir: &Path, extra: &str) -> ExperimentSpec {
        let text = format!(
            "
[experiment]
kind = simulate
output_dir = {}

[sim]
kmax = 2
nu = 1.0
dt = 0.01
horizon = 0.5
seed = 3

{extra}
",
            dir.display()
        );
        ExperimentSpec::parse(&text).unwrap()
    }

    #[test]
    fn reruns_write_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = simulate_spec(
            dir.path(),
            "[noise]\nclass = bounded\n\n[init]\nu0 = random:1.0\n",
        );
        let report = run(&spec).unwrap();
        assert!(report.passed());
        let first = fs::read(dir.path().join("trajectory_0.csv")).unwrap();
        run(&spec).unwrap();
        let second = fs::read(dir.path().join("trajectory_0.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn resolved_config_is_parseable_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = simulate_spec(dir.path(), "");
        run(&spec).unwrap();
        let echoed = fs::read_to_string(dir.path().join("resolved.ini")).unwrap();
        let spec2 = ExperimentSpec::parse(&echoed).unwrap();
        assert_eq!(spec.config_hash(), spec2.config_hash());
    }

    #[test]
    fn checkpoint_resume_reproduces_run_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let full = simulate_spec(
            dir.path(),
            "[noise]\nclass = bounded\n\n[init]\nu0 = random:1.0\nv0 = zero\n",
        );
        // uninterrupted reference
        let logs = run_ensemble(&full.sim, &full.u0, None).unwrap();
        let reference = &logs[0];

        // checkpoint halfway, then resume
        let split = simulate_spec(
            dir.path(),
            "[noise]\nclass = bounded\n\n[init]\nu0 = random:1.0\nv0 = zero\n\n[io]\ncheckpoint_t = 0.25\n",
        );
        run(&split).unwrap();
        let resumed = read_checkpoint(&dir.path().join("checkpoint.bin")).unwrap();
        assert_eq!(resumed.state.step, 25);
        let log = run_trajectory_from(
            &resumed.spec.sim,
            resumed.state,
            0,
            0,
            Some(resumed.word_pos),
            &[],
            |_, _| {},
        )
        .unwrap();
        // compare the overlap [0.25, 0.5] bitwise
        let offset = reference.sample_index_at(0.25).unwrap();
        for (i, t) in log.times.iter().enumerate() {
            assert_eq!(*t, reference.times[offset + i]);
            assert_eq!(log.u_h2[i].to_bits(), reference.u_h2[offset + i].to_bits());
            assert_eq!(
                log.accum_v_norm[i].to_bits(),
                reference.accum_v_norm[offset + i].to_bits()
            );
        }
        for (a, b) in log.final_u.coeffs().iter().zip(reference.final_u.coeffs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
