//! The `simctl` subcommands. Each returns an [`Exit`] status after writing
//! its outputs and a manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use selmut::{
    check_apriori, eps_limit_comparison, ess_active_set, ess_uniqueness_probe, ess_verify,
    ghost_population_probe, max_zero_set_speed, AprioriConstants, BoundReport, BranchingEvent,
    ComparisonReport, CorrectionMode, DiscreteMeasure, EssCertificate, GhostReport, LimitSimulator,
    LimitTrajectory, Simulator, Trajectory, UniquenessReport,
};

use crate::config::Config;
use crate::manifest::{Outcome, RunManifest};
use crate::output::{diagnostics_csv, forward_snapshot, jsonl, limit_snapshot, Writer};
use crate::{thread_pool, CliError, Exit};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub quiet: bool,
    /// Overrides `[forward] eps` (run-eps, compare) or `[sweep] eps` (sweep).
    pub eps: Vec<f64>,
}

impl RunOptions {
    pub fn new(config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunOptions {
            config: config.into(),
            out: Some(out.into()),
            seed: 0,
            quiet: true,
            eps: Vec::new(),
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs --out".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    EmptySupport { t: f64 },
    LandscapeSwitch { t: f64 },
    Extinction { t: f64 },
    Branching(BranchingEvent),
    Abort { reason: String },
}

/// Reports a config error on stderr and turns it into its exit status.
fn fail(opts: &RunOptions, e: CliError) -> Exit {
    if !opts.quiet || matches!(e.exit(), Exit::InvalidConfig) {
        eprintln!("simctl: {e}");
    }
    e.exit()
}

fn finish(
    opts: &RunOptions,
    dir: &Path,
    mut manifest: RunManifest,
    written: Vec<String>,
    exit: Exit,
) -> Exit {
    manifest.outputs = written;
    if let Err(e) = manifest.write(dir) {
        eprintln!("simctl: writing manifest: {e}");
        return Exit::NumericAbort;
    }
    for w in &manifest.warnings {
        if !opts.quiet {
            eprintln!("warning: {w}");
        }
    }
    exit
}

/// Output of one ε-run written into `dir`.
pub struct EpsRun {
    pub eps: f64,
    pub threshold: f64,
    pub trajectory: Trajectory,
}

pub fn simulate_eps(config: &Config, eps: f64, seed: u64) -> Result<EpsRun, CliError> {
    let sim = Simulator::new(config.sim_config(eps, seed)?)?;
    let threshold = sim.threshold();
    Ok(EpsRun {
        eps,
        threshold,
        trajectory: sim.run(),
    })
}

fn forward_events(config: &Config, traj: &Trajectory) -> Vec<Event> {
    let mut events = Vec::new();
    if let Some(sw) = &config.environment.switch {
        if traj.samples.last().is_some_and(|s| s.state.t >= sw.t) {
            events.push(Event::LandscapeSwitch { t: sw.t });
        }
    }
    let mut was_empty = false;
    for s in &traj.samples {
        if s.state.empty_support && !was_empty {
            events.push(Event::EmptySupport { t: s.state.t });
        }
        was_empty = s.state.empty_support;
    }
    if let Some(e) = &traj.failure {
        events.push(Event::Abort {
            reason: e.to_string(),
        });
    }
    events
}

fn write_forward(
    w: &mut Writer,
    config: &Config,
    prefix: &str,
    traj: &Trajectory,
) -> std::io::Result<()> {
    w.snapshots(
        prefix,
        &traj.samples,
        config.output.snapshot_every,
        forward_snapshot,
    )?;
    let join = |f: &str| {
        if prefix.is_empty() {
            f.to_string()
        } else {
            format!("{prefix}/{f}")
        }
    };
    w.put(&join("diagnostics.csv"), &diagnostics_csv(traj.records()))?;
    w.put(&join("events.jsonl"), &jsonl(&forward_events(config, traj)))
}

/// `run-eps`: one forward run. Exit 0 iff it completed and every configured
/// a priori bound holds.
pub fn cmd_run_eps(opts: &RunOptions) -> Exit {
    match run_eps(opts) {
        Ok(e) => e,
        Err(e) => fail(opts, e),
    }
}

fn run_eps(opts: &RunOptions) -> Result<Exit, CliError> {
    let config = Config::load(&opts.config)?;
    let eps = opts.eps.first().copied().unwrap_or(config.forward.eps);
    let run = simulate_eps(&config, eps, opts.seed)?;
    let dir = opts.out_dir()?;
    let mut manifest = RunManifest::new("run-eps", config.hash());
    let mut w = Writer::new(dir)?;
    write_forward(&mut w, &config, "", &run.trajectory)?;
    if let Some(e) = &run.trajectory.failure {
        manifest.outcome = Outcome::Aborted {
            reason: e.to_string(),
        };
        opts.say(format!("aborted: {e}"));
        return Ok(finish(opts, dir, manifest, w.written, Exit::NumericAbort));
    }
    let mut exit = Exit::Ok;
    match &config.bounds {
        Some(c) => {
            let report = check_apriori(&run.trajectory, eps, run.threshold, c);
            w.put_json("bounds.json", &report)?;
            opts.say(report.table());
            if !report.pass() {
                exit = Exit::CheckFailed;
            }
        }
        None => manifest
            .warnings
            .push("no [bounds] constants configured; a priori bounds not checked".into()),
    }
    if let Some(last) = run.trajectory.last() {
        opts.say(format!("t = {} mass = {}", last.state.t, last.state.mass));
    }
    Ok(finish(opts, dir, manifest, w.written, exit))
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub speed_bound: f64,
    pub max_zero_set_speed: f64,
    /// Every consecutive-sample semi-distance is within `1.1 V Δ`.
    pub speed_ok: bool,
    pub branching_events: usize,
    pub extinct_at_start: bool,
    pub dt: f64,
}

pub fn limit_report(traj: &LimitTrajectory) -> LimitReport {
    let v = traj.speed_bound;
    let max_speed = max_zero_set_speed(traj);
    LimitReport {
        speed_bound: v,
        max_zero_set_speed: max_speed,
        speed_ok: max_speed <= 1.1 * v,
        branching_events: traj.events.len(),
        extinct_at_start: traj.samples.first().is_some_and(|s| s.state.extinct),
        dt: traj.dt,
    }
}

pub fn simulate_limit(config: &Config, seed: u64) -> Result<LimitTrajectory, CliError> {
    Ok(LimitSimulator::new(config.limit_config(seed)?)?.run())
}

fn write_limit(
    w: &mut Writer,
    config: &Config,
    traj: &LimitTrajectory,
) -> std::io::Result<LimitReport> {
    w.snapshots(
        "",
        &traj.samples,
        config.output.snapshot_every,
        limit_snapshot,
    )?;
    w.put(
        "diagnostics.csv",
        &diagnostics_csv(traj.samples.iter().map(|s| &s.record)),
    )?;
    let mut events = Vec::new();
    let mut was_extinct = false;
    for s in &traj.samples {
        if s.state.extinct && !was_extinct {
            events.push(Event::Extinction { t: s.state.t });
        }
        was_extinct = s.state.extinct;
    }
    events.extend(traj.events.iter().cloned().map(Event::Branching));
    if let Some(e) = &traj.failure {
        events.push(Event::Abort {
            reason: e.to_string(),
        });
    }
    w.put("events.jsonl", &jsonl(&events))?;
    let report = limit_report(traj);
    w.put_json("limit_report.json", &report)?;
    Ok(report)
}

/// `run-limit`: one limit run with branching log and speed check.
pub fn cmd_run_limit(opts: &RunOptions) -> Exit {
    match run_limit(opts) {
        Ok(e) => e,
        Err(e) => fail(opts, e),
    }
}

fn run_limit(opts: &RunOptions) -> Result<Exit, CliError> {
    let config = Config::load(&opts.config)?;
    let traj = simulate_limit(&config, opts.seed)?;
    let dir = opts.out_dir()?;
    let mut manifest = RunManifest::new("run-limit", config.hash());
    let mut w = Writer::new(dir)?;
    let report = write_limit(&mut w, &config, &traj)?;
    if let Some(e) = &traj.failure {
        manifest.outcome = Outcome::Aborted {
            reason: e.to_string(),
        };
        opts.say(format!("aborted: {e}"));
        return Ok(finish(opts, dir, manifest, w.written, Exit::NumericAbort));
    }
    if report.extinct_at_start {
        manifest
            .warnings
            .push("extinction regime: max r <= 0 on the zero set at t = 0, μ = 0".into());
    }
    opts.say(format!(
        "branching events: {}, max zero-set speed {:.4} (V = {:.4})",
        report.branching_events, report.max_zero_set_speed, report.speed_bound
    ));
    let exit = if report.speed_ok {
        Exit::Ok
    } else {
        Exit::CheckFailed
    };
    Ok(finish(opts, dir, manifest, w.written, exit))
}

#[derive(Debug, Clone, Serialize)]
pub struct EssReport {
    pub measure: DiscreteMeasure,
    pub total: f64,
    pub certificate: EssCertificate,
    pub uniqueness: UniquenessReport,
}

pub fn solve_ess(config: &Config, seed: u64) -> Result<EssReport, CliError> {
    let omega = config.omega()?;
    let env = config.environment()?;
    let r = env.initial_rate();
    let kernel = config.competition(seed)?;
    let measure = ess_active_set(&omega, r, &kernel)?;
    let certificate = ess_verify(&measure, &omega, r, &kernel, &config.ess_tolerances());
    let seeds: Vec<u64> = (0..config.ess.n_inits as u64)
        .map(|k| seed.wrapping_mul(0x9E37_79B9).wrapping_add(k + 1))
        .collect();
    let uniqueness = ess_uniqueness_probe(
        &omega,
        r,
        &kernel,
        &config.replicator_params(),
        config.ess.n_inits.max(2),
        &seeds,
        config.ess.tv_tol,
    )?;
    Ok(EssReport {
        total: measure.total(),
        measure,
        certificate,
        uniqueness,
    })
}

/// `ess`: prints the ESS of `[ess] omega` with its certificate and the
/// uniqueness probe as JSON. Exit 0 iff both pass.
pub fn cmd_ess(opts: &RunOptions) -> Exit {
    match ess(opts) {
        Ok(e) => e,
        Err(e) => fail(opts, e),
    }
}

fn ess(opts: &RunOptions) -> Result<Exit, CliError> {
    let config = Config::load(&opts.config)?;
    let report = solve_ess(&config, opts.seed)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if !opts.quiet {
        println!("{text}");
    }
    let exit = if report.certificate.pass && report.uniqueness.pass {
        Exit::Ok
    } else {
        Exit::CheckFailed
    };
    if let Some(dir) = &opts.out {
        let manifest = RunManifest::new("ess", config.hash());
        let mut w = Writer::new(dir)?;
        w.put_json("ess.json", &report)?;
        return Ok(finish(opts, dir, manifest, w.written, exit));
    }
    Ok(exit)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub comparison: ComparisonReport,
    /// Constants calibrated on the first `ε` and frozen.
    pub constants: AprioriConstants,
    pub bounds: Vec<BoundReport>,
    /// `(ε, cumulative dissipation at the horizon)`.
    pub dissipation: Vec<(f64, f64)>,
    pub dissipation_ratio: f64,
    pub limit: LimitReport,
}

pub struct SweepRuns {
    pub forward: Vec<EpsRun>,
    pub limit: LimitTrajectory,
}

/// Runs every `ε` and the limit concurrently on the `SIMCTL_THREADS` pool.
pub fn simulate_sweep(config: &Config, eps: &[f64], seed: u64) -> Result<SweepRuns, CliError> {
    let pool = thread_pool();
    let (forward, limit) = pool.install(|| {
        rayon::join(
            || {
                use rayon::prelude::*;
                eps.par_iter()
                    .map(|&e| simulate_eps(config, e, seed))
                    .collect::<Result<Vec<_>, _>>()
            },
            || simulate_limit(config, seed),
        )
    });
    Ok(SweepRuns {
        forward: forward?,
        limit: limit?,
    })
}

pub fn sweep_report(config: &Config, runs: &SweepRuns) -> Result<SweepReport, CliError> {
    let kernel = config.competition(0)?;
    let fwd: Vec<(f64, f64, &Trajectory)> = runs
        .forward
        .iter()
        .map(|r| (r.eps, r.threshold, &r.trajectory))
        .collect();
    let comparison = eps_limit_comparison(&fwd, &runs.limit, &kernel, config.sweep.delta)?;
    let first = &runs.forward[0];
    let constants = AprioriConstants::calibrate(
        &first.trajectory,
        first.eps,
        first.threshold,
        config.sweep.margin,
        config.sweep.level_depth,
    );
    let bounds = runs
        .forward
        .iter()
        .map(|r| check_apriori(&r.trajectory, r.eps, r.threshold, &constants))
        .collect();
    let dissipation: Vec<(f64, f64)> = runs
        .forward
        .iter()
        .map(|r| {
            (
                r.eps,
                r.trajectory
                    .last()
                    .map_or(0.0, |s| s.record.dissipation_cum),
            )
        })
        .collect();
    let hi = dissipation
        .iter()
        .map(|d| d.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = dissipation
        .iter()
        .map(|d| d.1)
        .fold(f64::INFINITY, f64::min);
    Ok(SweepReport {
        comparison,
        constants,
        bounds,
        dissipation,
        dissipation_ratio: hi / lo,
        limit: limit_report(&runs.limit),
    })
}

/// `sweep`: forward runs over the `ε` list, one limit run, and the
/// comparison report. Exit 0 iff the environment distance decreases along
/// decreasing `ε`.
pub fn cmd_sweep(opts: &RunOptions) -> Exit {
    match sweep(opts) {
        Ok(e) => e,
        Err(e) => fail(opts, e),
    }
}

fn sweep(opts: &RunOptions) -> Result<Exit, CliError> {
    let config = Config::load(&opts.config)?;
    let eps = if opts.eps.is_empty() {
        config.sweep.eps.clone()
    } else {
        opts.eps.clone()
    };
    if eps.is_empty() {
        return Err(CliError::Config("empty ε list".into()));
    }
    let dir = opts.out_dir()?;
    let runs = simulate_sweep(&config, &eps, opts.seed)?;
    let mut manifest = RunManifest::new("sweep", config.hash());
    let mut w = Writer::new(dir)?;
    for r in &runs.forward {
        write_forward(&mut w, &config, &format!("eps_{}", r.eps), &r.trajectory)?;
    }
    let limit_dir = dir.join("limit");
    let mut lw = Writer::new(&limit_dir)?;
    write_limit(&mut lw, &config, &runs.limit)?;
    w.written
        .extend(lw.written.into_iter().map(|p| format!("limit/{p}")));
    let aborted: Vec<String> = runs
        .forward
        .iter()
        .filter_map(|r| {
            r.trajectory
                .failure
                .as_ref()
                .map(|e| format!("ε = {}: {e}", r.eps))
        })
        .chain(runs.limit.failure.as_ref().map(|e| format!("limit: {e}")))
        .collect();
    if !aborted.is_empty() {
        manifest.outcome = Outcome::Aborted {
            reason: aborted.join("; "),
        };
        return Ok(finish(opts, dir, manifest, w.written, Exit::NumericAbort));
    }
    let report = sweep_report(&config, &runs)?;
    w.put_json("sweep_report.json", &report)?;
    for row in &report.comparison.rows {
        opts.say(format!(
            "ε = {:<6} sup_t ‖I⋆u - I⋆μ‖ = {:.4e}  sup_t ‖φ_ε - φ‖ = {:.4e}",
            row.eps, row.sup_environment, row.sup_potential
        ));
    }
    let exit = if report.comparison.environment_monotone {
        Exit::Ok
    } else {
        Exit::CheckFailed
    };
    Ok(finish(opts, dir, manifest, w.written, exit))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub ghost: GhostReport,
    pub off_reemerges: bool,
    pub ramp_extinct: bool,
    pub sqrt_extinct: bool,
}

/// The ghost scenario under each correction mode: off, the configured
/// distance ramp, and the square-root mortality with the same threshold and
/// cap.
pub fn simulate_compare(
    config: &Config,
    eps: f64,
    seed: u64,
) -> Result<Vec<(&'static str, EpsRun)>, CliError> {
    let modes = [
        ("off", CorrectionMode::Off),
        ("distance_ramp", CorrectionMode::DistanceRamp),
        ("sqrt_mortality", CorrectionMode::SqrtMortality),
    ];
    let pool = thread_pool();
    pool.install(|| {
        use rayon::prelude::*;
        modes
            .par_iter()
            .map(|&(label, mode)| {
                let mut c = config.clone();
                c.correction = if mode == CorrectionMode::Off {
                    selmut::CorrectionSpec::off()
                } else {
                    selmut::CorrectionSpec {
                        mode,
                        ..config.correction
                    }
                };
                simulate_eps(&c, eps, seed).map(|r| (label, r))
            })
            .collect()
    })
}

pub fn compare_report(
    config: &Config,
    runs: &[(&'static str, EpsRun)],
) -> Result<CompareReport, CliError> {
    let ghost = config
        .ghost
        .as_ref()
        .ok_or_else(|| CliError::Config("compare needs a [ghost] section".into()))?;
    let t_switch = config.environment.switch.as_ref().map_or(0.0, |s| s.t);
    let rows: Vec<(&str, &Trajectory, f64, f64)> = runs
        .iter()
        .map(|(l, r)| (*l, &r.trajectory, r.eps, r.threshold))
        .collect();
    let report = ghost_population_probe(
        &rows,
        (ghost.probe[0], ghost.probe[1]),
        t_switch,
        ghost.reemergence_level,
    )?;
    let find = |label: &str| report.runs.iter().find(|r| r.label == label);
    Ok(CompareReport {
        off_reemerges: find("off").is_some_and(|r| r.reemergence_time.is_some()),
        ramp_extinct: find("distance_ramp").is_some_and(|r| r.extinct),
        sqrt_extinct: find("sqrt_mortality").is_some_and(|r| r.extinct),
        ghost: report,
    })
}

/// `compare`: exit 0 iff the uncorrected ghost re-emerges and both
/// corrections keep it extinct.
pub fn cmd_compare(opts: &RunOptions) -> Exit {
    match compare(opts) {
        Ok(e) => e,
        Err(e) => fail(opts, e),
    }
}

fn compare(opts: &RunOptions) -> Result<Exit, CliError> {
    let config = Config::load(&opts.config)?;
    if config.ghost.is_none() {
        return Err(CliError::Config("compare needs a [ghost] section".into()));
    }
    let eps = opts.eps.first().copied().unwrap_or(config.forward.eps);
    let dir = opts.out_dir()?;
    let runs = simulate_compare(&config, eps, opts.seed)?;
    let mut manifest = RunManifest::new("compare", config.hash());
    let mut w = Writer::new(dir)?;
    for (label, r) in &runs {
        write_forward(&mut w, &config, label, &r.trajectory)?;
    }
    let aborted: Vec<String> = runs
        .iter()
        .filter_map(|(l, r)| r.trajectory.failure.as_ref().map(|e| format!("{l}: {e}")))
        .collect();
    if !aborted.is_empty() {
        manifest.outcome = Outcome::Aborted {
            reason: aborted.join("; "),
        };
        return Ok(finish(opts, dir, manifest, w.written, Exit::NumericAbort));
    }
    let report = compare_report(&config, &runs)?;
    w.put_json("ghost_report.json", &report)?;
    for r in &report.ghost.runs {
        opts.say(format!(
            "{:<15} max probe mass {:.4e}  extinct {}  re-emerges at {:?}",
            r.label, r.max_mass, r.extinct, r.reemergence_time
        ));
    }
    let ok = report.off_reemerges && report.ramp_extinct && report.sqrt_extinct;
    Ok(finish(
        opts,
        dir,
        manifest,
        w.written,
        if ok { Exit::Ok } else { Exit::CheckFailed },
    ))
}
