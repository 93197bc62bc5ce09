//! Per-sample measurements and the uniform-in-ε bound checks built on them.

use serde::{Deserialize, Serialize};

use crate::competition::{convolve, CompetitionKernel};
use crate::error::{Error, Result};
use crate::forward::{SimState, Simulator, Trajectory};
use crate::grid::{semi_distance, Grid, SetMask, TraitField};
use crate::limit::{merged_components, LimitState, LimitTrajectory};
use crate::measure::{Atom, DiscreteMeasure};

/// Gap, in cells, below which neighbouring level-set components are counted
/// as one.
pub const DEFAULT_MERGE_GAP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `∫ u_ε` for ε-runs, `μ(ℝ)` for the limit.
    pub mass: f64,
    pub max_phi: f64,
    pub lipschitz: f64,
    pub min_second_diff: f64,
    /// `min H_ε(φ_ε)`; zero for limit runs.
    pub min_heps: f64,
    pub dissipation_cum: f64,
    /// `{φ_ε >= -f_ε}` for ε-runs, the zero set for the limit.
    pub level_set: SetMask,
    pub components: Vec<(f64, f64)>,
    pub component_count: usize,
    pub atoms: DiscreteMeasure,
    pub reanchor_magnitude: f64,
    /// The correction saw an empty populated set (ε-runs) or `μ = 0` (limit).
    pub empty_support: bool,
}

/// One atom per component of `level`: placed at the component's highest
/// point, carrying `∫ u` over the basin between the separating minima of `φ`.
pub fn extract_atoms(phi: &TraitField, u: &TraitField, level: &SetMask) -> DiscreteMeasure {
    let v = phi.values();
    let comps = level.components();
    if comps.is_empty() {
        return DiscreteMeasure::empty();
    }
    let peak = |(a, b): (usize, usize)| (a..=b).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap_or(a);
    let peaks: Vec<usize> = comps.iter().map(|&c| peak(c)).collect();
    let mut cuts = vec![0];
    for w in peaks.windows(2) {
        let valley = (w[0]..=w[1])
            .min_by(|&i, &j| v[i].total_cmp(&v[j]))
            .unwrap_or(w[0]);
        cuts.push(valley);
    }
    cuts.push(v.len());
    let h = phi.grid().spacing();
    let atoms = peaks
        .iter()
        .enumerate()
        .map(|(k, &p)| Atom {
            x: phi.grid().point(p),
            mass: u.values()[cuts[k]..cuts[k + 1]].iter().sum::<f64>() * h,
        })
        .collect();
    DiscreteMeasure::new(atoms)
}

pub fn forward_record(
    sim: &Simulator,
    state: &SimState,
    dissipation_cum: f64,
) -> Result<DiagnosticsRecord> {
    let fe = sim.threshold();
    let level_set = state.phi.superlevel_set(-fe);
    let components = merged_components(&level_set, DEFAULT_MERGE_GAP);
    let heps = sim.config().mutation.heps_apply(&state.phi, sim.eps())?;
    Ok(DiagnosticsRecord {
        t: state.t,
        mass: state.mass,
        max_phi: state.phi.max(),
        lipschitz: state.phi.lipschitz(),
        min_second_diff: state.phi.min_second_difference(),
        min_heps: heps.min(),
        dissipation_cum,
        atoms: extract_atoms(&state.phi, &state.u, &level_set),
        component_count: components.len(),
        components,
        level_set,
        reanchor_magnitude: 0.0,
        empty_support: state.empty_support,
    })
}

pub fn limit_record(state: &LimitState, reanchor: f64, merge_gap: usize) -> DiagnosticsRecord {
    let components = merged_components(&state.zero_set, merge_gap);
    DiagnosticsRecord {
        t: state.t,
        mass: state.mu.total(),
        max_phi: state.phi.max(),
        lipschitz: state.phi.lipschitz(),
        min_second_diff: state.phi.min_second_difference(),
        min_heps: 0.0,
        dissipation_cum: 0.0,
        level_set: state.zero_set.clone(),
        component_count: components.len(),
        components,
        atoms: state.mu.clone(),
        reanchor_magnitude: reanchor,
        empty_support: state.extinct,
    }
}

/// Adds `(dt/ε) ∫ (r - I⋆u)^2 u` at `state` to the record's running total.
pub fn dissipation_update(
    record: &DiagnosticsRecord,
    sim: &Simulator,
    state: &SimState,
    dt: f64,
) -> Result<DiagnosticsRecord> {
    let parts = sim.rhs_parts(state.t, &state.phi)?;
    let mut next = record.clone();
    next.dissipation_cum += dt * sim.dissipation_rate(state.t, &parts);
    Ok(next)
}

/// Constants of the a priori bounds, calibrated once and then frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriConstants {
    /// `1/C <= ∫u <= C`.
    pub mass: f64,
    /// `max φ <= ε log(1/ε) + C ε`.
    pub max_phi: f64,
    /// `|∂x φ| <= C`.
    pub lipschitz: f64,
    /// `∂xx φ >= -C / f_ε`.
    pub semiconcavity: f64,
    /// `H_ε(φ) >= -C ε / f_ε`.
    pub heps: f64,
    /// Depth `l` of the level set `{φ >= -l}` that must avoid the outer 5% of
    /// the grid.
    pub level_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// The constant this trajectory needs.
    pub observed: f64,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
    /// Sample time and trait location of the worst case.
    pub worst_t: f64,
    pub worst_x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub eps: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<14} {:>14} {:>14} {:>14}  result\n",
            "bound", "observed", "threshold", "margin"
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{:<14} {:>14.6e} {:>14.6e} {:>14.6e}  {}\n",
                c.name,
                c.observed,
                c.threshold,
                c.margin,
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

struct Worst {
    value: f64,
    t: f64,
    x: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: f64::NEG_INFINITY,
            t: 0.0,
            x: None,
        }
    }

    fn offer(&mut self, value: f64, t: f64, x: Option<f64>) {
        if value > self.value {
            *self = Worst { value, t, x };
        }
    }
}

fn argmax_slope(phi: &TraitField) -> f64 {
    let v = phi.values();
    let h = phi.grid().spacing();
    let k = (0..v.len() - 1)
        .max_by(|&i, &j| (v[i + 1] - v[i]).abs().total_cmp(&(v[j + 1] - v[j]).abs()))
        .unwrap_or(0);
    phi.grid().point(k) + 0.5 * h
}

fn argmin_second(phi: &TraitField) -> f64 {
    let v = phi.values();
    let k = (1..v.len() - 1)
        .min_by(|&i, &j| {
            (v[i + 1] - 2.0 * v[i] + v[i - 1]).total_cmp(&(v[j + 1] - 2.0 * v[j] + v[j - 1]))
        })
        .unwrap_or(1);
    phi.grid().point(k)
}

/// The constants each bound needs on this trajectory, with the worst sample.
fn observe(traj: &Trajectory, eps: f64, fe: f64, level_depth: f64) -> [Worst; 6] {
    let mut w = [
        Worst::new(),
        Worst::new(),
        Worst::new(),
        Worst::new(),
        Worst::new(),
        Worst::new(),
    ];
    let log_term = eps * (1.0 / eps).ln();
    for s in &traj.samples {
        let r = &s.record;
        let t = r.t;
        w[0].offer(r.mass.max(1.0 / r.mass), t, None);
        w[1].offer((r.max_phi - log_term) / eps, t, None);
        w[2].offer(r.lipschitz, t, Some(argmax_slope(&s.state.phi)));
        w[3].offer(
            -r.min_second_diff * fe,
            t,
            Some(argmin_second(&s.state.phi)),
        );
        w[4].offer(-r.min_heps * fe / eps, t, None);
        let grid = s.state.phi.grid();
        let mid = 0.5 * (grid.x_min() + grid.x_max());
        let reach = s
            .state
            .phi
            .superlevel_set(-level_depth)
            .member_points()
            .into_iter()
            .map(|x| (x - mid).abs())
            .fold(0.0, f64::max);
        w[5].offer(reach, t, None);
    }
    w
}

const NAMES: [&str; 6] = [
    "mass",
    "max_phi",
    "lipschitz",
    "semiconcavity",
    "heps_lower",
    "level_sets",
];

impl AprioriConstants {
    /// Each constant is the observed requirement inflated by `margin`.
    pub fn calibrate(traj: &Trajectory, eps: f64, fe: f64, margin: f64, level_depth: f64) -> Self {
        let w = observe(traj, eps, fe, level_depth);
        let inflate = |v: f64| v + (margin - 1.0) * v.abs().max(1e-6);
        AprioriConstants {
            mass: w[0].value * margin,
            max_phi: inflate(w[1].value),
            lipschitz: inflate(w[2].value),
            semiconcavity: inflate(w[3].value),
            heps: inflate(w[4].value),
            level_depth,
        }
    }
}

/// The six a priori bounds with frozen constants; the level-set bound uses
/// the fixed compact that excludes the outer 5% of the grid.
pub fn check_apriori(
    traj: &Trajectory,
    eps: f64,
    fe: f64,
    constants: &AprioriConstants,
) -> BoundReport {
    let w = observe(traj, eps, fe, constants.level_depth);
    let half_compact = traj
        .samples
        .first()
        .map(|s| 0.45 * s.state.phi.grid().width())
        .unwrap_or(0.0);
    let thresholds = [
        constants.mass,
        constants.max_phi,
        constants.lipschitz,
        constants.semiconcavity,
        constants.heps,
        half_compact,
    ];
    let checks = w
        .iter()
        .zip(thresholds)
        .zip(NAMES)
        .map(|((w, threshold), name)| BoundCheck {
            name: name.to_string(),
            observed: w.value,
            threshold,
            margin: threshold - w.value,
            pass: w.value.is_finite() && w.value <= threshold,
            worst_t: w.t,
            worst_x: w.x,
        })
        .collect();
    BoundReport { eps, checks }
}

/// Mass inside a probe region over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostRun {
    pub label: String,
    pub eps: f64,
    pub series: Vec<(f64, f64)>,
    pub max_mass: f64,
    /// `e^{-f_ε/(2ε)}`.
    pub extinction_threshold: f64,
    /// Probe mass stayed below the threshold at every sample.
    pub extinct: bool,
    /// First sample at or after the switch with probe mass above the
    /// re-emergence level.
    pub reemergence_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostReport {
    pub probe: (f64, f64),
    pub t_switch: f64,
    pub reemergence_level: f64,
    pub runs: Vec<GhostRun>,
}

pub fn probe_mass(u: &TraitField, probe: &SetMask) -> f64 {
    probe
        .indices()
        .into_iter()
        .map(|i| u.values()[i])
        .sum::<f64>()
        * u.grid().spacing()
}

/// Tracks `∫_probe u` for each run given as `(label, trajectory, ε, f_ε)`.
pub fn ghost_population_probe(
    runs: &[(&str, &Trajectory, f64, f64)],
    probe: (f64, f64),
    t_switch: f64,
    reemergence_level: f64,
) -> Result<GhostReport> {
    let mut out = Vec::new();
    for &(label, traj, eps, fe) in runs {
        let first = traj.samples.first().ok_or_else(|| Error::Blowup {
            t: 0.0,
            detail: format!("run {label} has no samples"),
        })?;
        let grid = *first.state.u.grid();
        let mask = SetMask::interval(grid, probe.0, probe.1);
        let series: Vec<(f64, f64)> = traj
            .samples
            .iter()
            .map(|s| (s.state.t, probe_mass(&s.state.u, &mask)))
            .collect();
        let max_mass = series.iter().map(|p| p.1).fold(0.0, f64::max);
        let extinction_threshold = (-fe / (2.0 * eps)).exp();
        let reemergence_time = series
            .iter()
            .find(|(t, m)| *t >= t_switch && *m > reemergence_level)
            .map(|p| p.0);
        out.push(GhostRun {
            label: label.to_string(),
            eps,
            extinct: series.iter().all(|p| p.1 < extinction_threshold),
            series,
            max_mass,
            extinction_threshold,
            reemergence_time,
        });
    }
    Ok(GhostReport {
        probe,
        t_switch,
        reemergence_level,
        runs: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub eps: f64,
    /// `sup_t ‖I⋆u_ε - I⋆μ‖_∞`.
    pub sup_environment: f64,
    /// `(∫ ‖I⋆u_ε - I⋆μ‖_∞^2 dt)^{1/2}`.
    pub l2_environment: f64,
    /// `sup_t ‖φ_ε - φ‖_∞`.
    pub sup_potential: f64,
    /// Fraction of samples where `{φ_ε >= -f_ε}` and `{φ = 0}` are more than
    /// `delta` apart in either direction.
    pub mismatch_fraction: f64,
    pub matched_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub environment_monotone: bool,
    pub potential_monotone: bool,
    pub delta: f64,
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// `sup_t` and `L²_t` of `sup_x |a - b|` over paired samples.
pub fn distance_series(times: &[f64], a: &[TraitField], b: &[TraitField]) -> Result<(f64, f64)> {
    let mut sup: f64 = 0.0;
    let mut l2 = 0.0;
    for k in 0..a.len() {
        let d = a[k].sup_distance(&b[k])?;
        sup = sup.max(d);
        if k + 1 < a.len() {
            let dn = a[k + 1].sup_distance(&b[k + 1])?;
            l2 += 0.5 * (d * d + dn * dn) * (times[k + 1] - times[k]);
        }
    }
    Ok((sup, l2.sqrt()))
}

/// Compares each ε-run with the limit run at shared sample times. Rows come
/// out in the order given; monotonicity is checked along decreasing ε.
pub fn eps_limit_comparison(
    forward: &[(f64, f64, &Trajectory)],
    limit: &LimitTrajectory,
    kernel: &CompetitionKernel,
    delta: f64,
) -> Result<ComparisonReport> {
    let limit_grid: Grid = *limit
        .samples
        .first()
        .ok_or_else(|| Error::Blowup {
            t: 0.0,
            detail: "limit run has no samples".into(),
        })?
        .state
        .phi
        .grid();
    let mut rows = Vec::new();
    for &(eps, fe, traj) in forward {
        let mut times = Vec::new();
        let mut env_eps = Vec::new();
        let mut env_lim = Vec::new();
        let mut sup_phi: f64 = 0.0;
        let mut mismatches = 0;
        for s in &traj.samples {
            if !s.state.phi.grid().same_as(&limit_grid) {
                return Err(Error::GridMismatch(format!(
                    "ε = {eps} run grid differs from the limit grid"
                )));
            }
            let t = s.state.t;
            let Some(l) = limit
                .samples
                .iter()
                .find(|l| (l.state.t - t).abs() <= 1e-9 * t.abs().max(1.0))
            else {
                continue;
            };
            times.push(t);
            env_eps.push(convolve(kernel, &s.state.u)?);
            env_lim.push(l.state.environment.clone());
            sup_phi = sup_phi.max(s.state.phi.sup_distance(&l.state.phi)?);
            let populated = s.state.phi.superlevel_set(-fe);
            let zero = &l.state.zero_set;
            if semi_distance(&populated, zero) > delta || semi_distance(zero, &populated) > delta {
                mismatches += 1;
            }
        }
        let (sup_env, l2_env) = distance_series(&times, &env_eps, &env_lim)?;
        rows.push(ComparisonRow {
            eps,
            sup_environment: sup_env,
            l2_environment: l2_env,
            sup_potential: sup_phi,
            mismatch_fraction: if times.is_empty() {
                1.0
            } else {
                mismatches as f64 / times.len() as f64
            },
            matched_samples: times.len(),
        });
    }
    let mut ordered = rows.clone();
    ordered.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let env: Vec<f64> = ordered.iter().map(|r| r.sup_environment).collect();
    let phi: Vec<f64> = ordered.iter().map(|r| r.sup_potential).collect();
    Ok(ComparisonReport {
        environment_monotone: decreasing(&env),
        potential_monotone: decreasing(&phi),
        rows,
        delta,
    })
}

/// `ω(Δ) = max ‖I⋆μ(t + Δ) - I⋆μ(t)‖_∞` for lags of 1..=max_lag samples.
pub fn environment_modulus(limit: &LimitTrajectory, max_lag: usize) -> Result<Vec<(f64, f64)>> {
    let s = &limit.samples;
    let mut out = Vec::new();
    for lag in 1..=max_lag.min(s.len().saturating_sub(1)) {
        let mut worst: f64 = 0.0;
        for k in 0..s.len() - lag {
            worst = worst.max(
                s[k + lag]
                    .state
                    .environment
                    .sup_distance(&s[k].state.environment)?,
            );
        }
        out.push((s[lag].state.t - s[0].state.t, worst));
    }
    Ok(out)
}

/// Largest `semi_distance(Z(t+Δ), Z(t)) / Δ` over consecutive limit samples,
/// skipping pairs where either sample is extinct (the zero set then only
/// tracks where `φ` was re-anchored).
pub fn max_zero_set_speed(limit: &LimitTrajectory) -> f64 {
    limit
        .samples
        .windows(2)
        .filter(|w| !w[0].state.extinct && !w[1].state.extinct)
        .map(|w| {
            semi_distance(&w[1].state.zero_set, &w[0].state.zero_set)
                / (w[1].state.t - w[0].state.t)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correction::CorrectionSpec;
    use crate::environment::{EnvironmentSpec, RateProfile};
    use crate::forward::{InitialProfile, SimConfig};
    use crate::grid::FieldRole;
    use crate::mutation::MutationKernel;

    fn config(eps: f64) -> SimConfig {
        let grid = Grid::symmetric(2.0, 201).unwrap();
        let r = RateProfile::Quadratic {
            peak: 0.6,
            center: 0.0,
            curvature: 0.5,
        }
        .sample(&grid)
        .unwrap();
        SimConfig {
            env: EnvironmentSpec::new(r, 1.5, 0.3, 0.5),
            competition: CompetitionKernel::gaussian(1.0, 0.5).unwrap(),
            mutation: MutationKernel::uniform(0.5, 1.0).unwrap(),
            correction: CorrectionSpec::distance_ramp(1.0, 4.0, 2.0),
            eps,
            horizon: 0.2,
            dt: None,
            sample_dt: 0.05,
            initial: InitialProfile::single(0.0, 1.0)
                .with_slope_cap(1.0)
                .with_mass(0.5),
            p_max: 2.0,
            mass_max: None,
        }
    }

    #[test]
    fn atoms_lie_in_level_set_and_carry_basin_mass() {
        let g = Grid::symmetric(2.0, 401).unwrap();
        let eps = 0.05;
        let phi = TraitField::from_fn(g, FieldRole::Potential, |x| -((x * x - 1.0).powi(2)) * 0.5)
            .unwrap();
        let u = TraitField::from_fn(g, FieldRole::Density, |x| {
            (-((x * x - 1.0).powi(2)) * 0.5 / eps).exp()
        })
        .unwrap();
        let level = phi.superlevel_set(-0.1);
        let atoms = extract_atoms(&phi, &u, &level);
        assert_eq!(atoms.len(), 2);
        for a in atoms.atoms() {
            assert!(level.contains(g.nearest_index(a.x)));
        }
        assert!((atoms.total() - u.integral()).abs() < 1e-12);
        // the basins differ only by the valley cell
        assert!((atoms.atoms()[0].mass - atoms.atoms()[1].mass).abs() < 1e-5);
    }

    #[test]
    fn dissipation_is_nondecreasing_and_update_matches() {
        let sim = Simulator::new(config(0.05)).unwrap();
        let traj = sim.run();
        assert!(traj.completed());
        let d: Vec<f64> = traj.records().map(|r| r.dissipation_cum).collect();
        assert!(d.windows(2).all(|w| w[1] >= w[0]));
        let s0 = &traj.samples[0];
        let upd = dissipation_update(&s0.record, &sim, &s0.state, 1e-3).unwrap();
        let parts = sim.rhs_parts(0.0, &s0.state.phi).unwrap();
        assert!((upd.dissipation_cum - 1e-3 * sim.dissipation_rate(0.0, &parts)).abs() < 1e-15);
    }

    #[test]
    fn empty_density_adds_no_dissipation() {
        let sim = Simulator::new(config(0.05)).unwrap();
        let g = *sim.config().grid();
        let phi = TraitField::constant(g, FieldRole::Potential, -100.0).unwrap();
        let parts = sim.rhs_parts(0.0, &phi).unwrap();
        assert_eq!(sim.dissipation_rate(0.0, &parts), 0.0);
    }

    #[test]
    fn calibrated_constants_pass_on_reference() {
        let sim = Simulator::new(config(0.05)).unwrap();
        let traj = sim.run();
        let fe = sim.threshold();
        let c = AprioriConstants::calibrate(&traj, 0.05, fe, 2.0, 0.5);
        let report = check_apriori(&traj, 0.05, fe, &c);
        assert!(report.pass(), "{}", report.table());
        assert_eq!(report.checks.len(), 6);
    }

    #[test]
    fn injected_spike_fails_lipschitz_with_location() {
        let sim = Simulator::new(config(0.05)).unwrap();
        let mut traj = sim.run();
        let fe = sim.threshold();
        let c = AprioriConstants::calibrate(&traj, 0.05, fe, 2.0, 0.5);
        let k = traj.samples.len() - 1;
        let g = *traj.samples[k].state.phi.grid();
        let mut v = traj.samples[k].state.phi.values().to_vec();
        let spike = g.nearest_index(1.0);
        v[spike] += 1.0;
        let phi = TraitField::new(g, v, FieldRole::Potential).unwrap();
        let t = traj.samples[k].state.t;
        let state = sim.state_at(t, phi).unwrap();
        traj.samples[k].record =
            forward_record(&sim, &state, traj.samples[k].record.dissipation_cum).unwrap();
        traj.samples[k].state = state;
        let report = check_apriori(&traj, 0.05, fe, &c);
        let lip = report.check("lipschitz").unwrap();
        assert!(!lip.pass);
        assert_eq!(lip.worst_t, t);
        assert!((lip.worst_x.unwrap() - 1.0).abs() <= g.spacing());
    }

    #[test]
    fn slope_below_rate_gradient_is_refused() {
        let mut c = config(0.05);
        c.correction.slope = 0.5;
        assert!(matches!(
            Simulator::new(c),
            Err(Error::Hypothesis {
                hypothesis: "assdep",
                ..
            })
        ));
    }

    #[test]
    fn distance_series_of_identical_fields_is_zero() {
        let g = Grid::symmetric(1.0, 21).unwrap();
        let f = TraitField::from_fn(g, FieldRole::Rate, |x| x.sin()).unwrap();
        let (s, l) = distance_series(
            &[0.0, 1.0],
            &[f.clone(), f.clone()],
            &[f.clone(), f.clone()],
        )
        .unwrap();
        assert_eq!((s, l), (0.0, 0.0));
        let shifted = TraitField::from_fn(g, FieldRole::Rate, |x| (x + g.spacing()).sin()).unwrap();
        let (s, _) = distance_series(&[0.0], &[f.clone()], &[shifted]).unwrap();
        assert!((s - f.lipschitz() * g.spacing()).abs() < 0.1 * g.spacing());
    }

    #[test]
    fn probe_where_rate_is_negative_stays_extinct() {
        let mut c = config(0.05);
        c.correction = CorrectionSpec::off();
        let off = Simulator::new(c).unwrap().run();
        let on_sim = Simulator::new(config(0.05)).unwrap();
        let on = on_sim.run();
        let fe = on_sim.threshold();
        let report = ghost_population_probe(
            &[("off", &off, 0.05, fe), ("on", &on, 0.05, fe)],
            (1.7, 2.0),
            0.0,
            0.1,
        )
        .unwrap();
        assert!(report
            .runs
            .iter()
            .all(|r| r.extinct && r.reemergence_time.is_none()));
        assert!((report.runs[0].eps - 0.05).abs() < 1e-9);
    }
}
