//! The constrained Hamilton-Jacobi limit
//!
//! ```text
//! ∂t φ = r - I⋆μ - min(K d(x, {φ = 0}), D0) + H(∂x φ),    max φ = 0,
//! ```
//!
//! where `μ` is the ESS on the zero set, recomputed every step.

use serde::{Deserialize, Serialize};

use crate::competition::{convolve_measure, CompetitionKernel, Positivity};
use crate::correction::{CorrectionMode, CorrectionSpec};
use crate::diagnostics::{limit_record, DiagnosticsRecord};
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::ess::{ess_verify, ActiveSetSolver, EssCertificate, EssTolerances};
use crate::forward::InitialProfile;
use crate::grid::{FieldRole, Grid, SetMask, TraitField};
use crate::measure::DiscreteMeasure;
use crate::mutation::MutationKernel;

/// Numerical Hamiltonian used by the limit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flux {
    /// Lax-Friedrichs with `a = max |H'|` on `[-p_max, p_max]`.
    LaxFriedrichs,
    /// Lax-Friedrichs with `a = max(|H'(p⁻)|, |H'(p⁺)|)` per node.
    LocalLaxFriedrichs,
    /// Exact Riemann value: `min H` over `[p⁺, p⁻]` when `p⁻ >= p⁺`, else
    /// `max(H(p⁻), H(p⁺))`. Keeps isolated maxima of `φ` in place.
    #[default]
    Godunov,
}

/// Monotone Lax-Friedrichs flux
/// `Ĥ(p⁻, p⁺) = H((p⁻ + p⁺)/2) - a (p⁻ - p⁺)/2` with `a = max |H'|` on
/// `[-p_max, p_max]`; one-sided at the ends. An explicit step with
/// `dt <= h / a` is monotone.
pub fn numerical_hamiltonian(
    phi: &TraitField,
    kernel: &MutationKernel,
    p_max: f64,
) -> Result<TraitField> {
    let a = kernel.max_hamiltonian_slope(p_max)?;
    numerical_hamiltonian_with(phi, kernel, p_max, Flux::LaxFriedrichs, a)
}

/// Any [`Flux`]; explicit steps are monotone for `dt <= h / (2 max |H'|)`.
pub fn numerical_hamiltonian_flux(
    phi: &TraitField,
    kernel: &MutationKernel,
    p_max: f64,
    flux: Flux,
) -> Result<TraitField> {
    let a = kernel.max_hamiltonian_slope(p_max)?;
    numerical_hamiltonian_with(phi, kernel, p_max, flux, a)
}

fn numerical_hamiltonian_with(
    phi: &TraitField,
    kernel: &MutationKernel,
    p_max: f64,
    flux: Flux,
    a: f64,
) -> Result<TraitField> {
    let g = phi.grid();
    let h = g.spacing();
    let v = phi.values();
    let n = v.len();
    let slopes: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    if let Some(k) = slopes.iter().position(|s| s.abs() > p_max) {
        return Err(Error::SlopeBound {
            x: g.point(k) + 0.5 * h,
            slope: slopes[k],
            bound: p_max,
        });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (pm, pp) = match (i, i + 1 == n) {
            (0, _) => (slopes[0], slopes[0]),
            (_, true) => (slopes[n - 2], slopes[n - 2]),
            _ => (slopes[i - 1], slopes[i]),
        };
        let value = match flux {
            Flux::LaxFriedrichs => kernel.hamiltonian(0.5 * (pm + pp))? - 0.5 * a * (pm - pp),
            Flux::LocalLaxFriedrichs => {
                let a = kernel
                    .hamiltonian_derivative(pm)?
                    .abs()
                    .max(kernel.hamiltonian_derivative(pp)?.abs());
                kernel.hamiltonian(0.5 * (pm + pp))? - 0.5 * a * (pm - pp)
            }
            // H is convex with its minimum H(0) = 0 at p = 0
            Flux::Godunov if pm >= pp => kernel.hamiltonian(0.0_f64.clamp(pp, pm))?,
            Flux::Godunov => kernel.hamiltonian(pm)?.max(kernel.hamiltonian(pp)?),
        };
        out.push(value);
    }
    Ok(TraitField::raw(*g, out, FieldRole::Rate))
}

/// `V = 2 sup_{0 < |ξ| <= 2 p_max} H(ξ) / |ξ|` by a search over `samples`
/// points per side; the `ξ -> 0` limit `H'(0) = 0` needs no special case.
pub fn support_speed_bound_sampled(
    kernel: &MutationKernel,
    p_max: f64,
    samples: usize,
) -> Result<f64> {
    let top = 2.0 * p_max;
    let mut best: f64 = 0.0;
    for k in 1..=samples {
        let xi = top * k as f64 / samples as f64;
        best = best
            .max(kernel.hamiltonian(xi)? / xi)
            .max(kernel.hamiltonian(-xi)? / xi);
    }
    Ok(2.0 * best)
}

pub fn support_speed_bound(kernel: &MutationKernel, p_max: f64) -> Result<f64> {
    support_speed_bound_sampled(kernel, p_max, 4000)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitConfig {
    pub env: EnvironmentSpec,
    pub competition: CompetitionKernel,
    pub mutation: MutationKernel,
    /// Slope and cap of `D`; mode `off` drops `D`.
    pub correction: CorrectionSpec,
    pub horizon: f64,
    pub dt: Option<f64>,
    pub sample_dt: f64,
    /// Shape of `φ⁰`, shifted so that `max φ⁰ = 0`.
    pub initial: InitialProfile,
    pub p_max: f64,
    /// Zero set `{φ >= -tol_zero}`; defaults to `0.1 h p_max`.
    pub tol_zero: Option<f64>,
    pub tolerances: EssTolerances,
    /// Zero-set components separated by at most this many empty cells count
    /// as one.
    pub merge_gap_cells: usize,
    pub flux: Flux,
    /// A rise of the component count must persist this many samples.
    pub persist_samples: usize,
}

impl LimitConfig {
    pub fn grid(&self) -> &Grid {
        self.env.grid()
    }

    pub fn tol_zero(&self) -> f64 {
        self.tol_zero
            .unwrap_or(0.1 * self.grid().spacing() * self.p_max)
    }

    /// CFL bound `h / a` for Lax-Friedrichs, `h / (2a)` otherwise.
    pub fn dt_max(&self) -> Result<f64> {
        let a = self.mutation.max_hamiltonian_slope(self.p_max)?;
        let a = match self.flux {
            Flux::LaxFriedrichs => a,
            _ => 2.0 * a,
        };
        Ok(if a > 0.0 {
            self.grid().spacing() / a
        } else {
            f64::INFINITY
        })
    }

    fn default_dt(&self) -> Result<f64> {
        let h = self.grid().spacing();
        let i0 = self.competition.eval(0.0);
        let mass = if i0 > 0.0 {
            self.env.max_rate().max(0.0) / i0
        } else {
            0.0
        };
        let forcing = self.env.sup_rate()
            + self.competition.sup_norm(self.grid().width()) * mass
            + self.d_cap();
        let by_forcing = if forcing > 0.0 {
            h * self.p_max / forcing
        } else {
            f64::INFINITY
        };
        let dt = 0.5 * self.dt_max()?.min(by_forcing);
        Ok(dt.min(self.sample_dt))
    }

    fn d_cap(&self) -> f64 {
        match self.correction.mode {
            CorrectionMode::Off => 0.0,
            _ => self.correction.cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.competition.positivity() == Positivity::Failed {
            return Err(Error::hypothesis(
                "strongcompet",
                "competition kernel failed the positive quadratic form check",
            ));
        }
        if self.correction.mode != CorrectionMode::Off {
            let need = 2.0 * self.env.max_rate_slope();
            if self.correction.slope < need {
                return Err(Error::hypothesis(
                    "assdep",
                    format!(
                        "slope K_D = {} below 2 max|∂x r| = {need}",
                        self.correction.slope
                    ),
                ));
            }
            if !(self.correction.cap > 0.0) {
                return Err(Error::hypothesis("assdep", "cap D0 must be positive"));
            }
        }
        if !(self.p_max > 0.0) {
            return Err(Error::hypothesis(
                "stability",
                format!("p_max must be positive, got {}", self.p_max),
            ));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite() && self.sample_dt > 0.0) {
            return Err(Error::hypothesis(
                "time",
                "need horizon >= 0 and sample_dt > 0",
            ));
        }
        if let Some(dt) = self.dt {
            let dt_max = self.dt_max()?;
            if !(dt > 0.0 && dt <= dt_max) {
                return Err(Error::hypothesis(
                    "stability",
                    format!("dt = {dt} outside (0, h/a = {dt_max:.3e}]"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub t: f64,
    pub phi: TraitField,
    pub zero_set: SetMask,
    pub mu: DiscreteMeasure,
    /// `I⋆μ` on the grid.
    pub environment: TraitField,
    pub d: TraitField,
    pub certificate: EssCertificate,
    /// Upward shift applied by the last re-anchoring, 0 if none.
    pub reanchor: f64,
    /// `μ = 0`: the rate is nonpositive on the whole zero set.
    pub extinct: bool,
}

#[derive(Debug, Clone)]
pub struct LimitSimulator {
    config: LimitConfig,
    a: f64,
    dt: f64,
}

impl LimitSimulator {
    pub fn new(config: LimitConfig) -> Result<Self> {
        config.validate()?;
        let a = config.mutation.max_hamiltonian_slope(config.p_max)?;
        let dt = match config.dt {
            Some(dt) => dt,
            None => config.default_dt()?,
        };
        Ok(LimitSimulator { config, a, dt })
    }

    pub fn config(&self) -> &LimitConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speed_bound(&self) -> Result<f64> {
        support_speed_bound(&self.config.mutation, self.config.p_max)
    }

    pub fn initial_phi(&self) -> Result<TraitField> {
        let g = *self.config.grid();
        let phi = TraitField::from_fn(g, FieldRole::Potential, |x| self.config.initial.shape(x))?;
        let top = phi.max();
        Ok(TraitField::raw(
            g,
            phi.values().iter().map(|p| p - top).collect(),
            FieldRole::Potential,
        ))
    }

    fn correction_field(&self, zero_set: &SetMask) -> TraitField {
        let g = *self.config.grid();
        if self.config.correction.mode == CorrectionMode::Off {
            return TraitField::zeros(g, FieldRole::Correction);
        }
        let (k, cap) = (self.config.correction.slope, self.config.correction.cap);
        let values = zero_set
            .distance_field()
            .into_iter()
            .map(|d| (k * d).min(cap))
            .collect();
        TraitField::raw(g, values, FieldRole::Correction)
    }

    /// Builds the full state for a potential whose maximum is already in
    /// `[-tol_zero, 0]`.
    pub fn state_at(
        &self,
        solver: &mut ActiveSetSolver,
        t: f64,
        phi: TraitField,
        reanchor: f64,
    ) -> Result<LimitState> {
        let zero_set = phi.superlevel_set(-self.config.tol_zero());
        let r = self.config.env.rate_at(t);
        let mu = solver
            .solve(&zero_set, r, &self.config.competition)
            .map_err(|e| Error::EssFailure {
                t,
                detail: e.to_string(),
            })?;
        let certificate = ess_verify(
            &mu,
            &zero_set,
            r,
            &self.config.competition,
            &self.config.tolerances,
        );
        if !certificate.pass {
            return Err(Error::EssFailure {
                t,
                detail: format!(
                    "certificate failed: support {:.3e}, domain {:.3e}, gap {:.3e}",
                    certificate.residual_support,
                    certificate.residual_domain,
                    certificate.quadratic_gap
                ),
            });
        }
        let environment = convolve_measure(&self.config.competition, &mu, self.config.grid())?;
        let d = self.correction_field(&zero_set);
        let extinct = mu.is_empty();
        Ok(LimitState {
            t,
            phi,
            zero_set,
            mu,
            environment,
            d,
            certificate,
            reanchor,
            extinct,
        })
    }

    pub fn initial_state(&self, solver: &mut ActiveSetSolver) -> Result<LimitState> {
        let phi = self.initial_phi()?;
        self.state_at(solver, 0.0, phi, 0.0)
    }

    /// Forward Euler on the flux form, projection onto `φ <= 0`, and
    /// re-anchoring when the maximum fell below `-tol_zero`.
    pub fn step(
        &self,
        solver: &mut ActiveSetSolver,
        state: &LimitState,
        dt: f64,
    ) -> Result<LimitState> {
        let hamiltonian = numerical_hamiltonian_with(
            &state.phi,
            &self.config.mutation,
            self.config.p_max,
            self.config.flux,
            self.a,
        )
        .map_err(|e| match e {
            Error::SlopeBound { x, slope, bound } => Error::Blowup {
                t: state.t,
                detail: format!("slope {slope:.4} at x = {x:.4} exceeds p_max = {bound}"),
            },
            other => other,
        })?;
        let r = self.config.env.rate_at(state.t);
        let mut next: Vec<f64> = state
            .phi
            .values()
            .iter()
            .zip(r.values())
            .zip(state.environment.values())
            .zip(state.d.values().iter().zip(hamiltonian.values()))
            .map(|(((p, r), e), (d, h))| (p + dt * (r - e - d + h)).min(0.0))
            .collect();
        if let Some(k) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                t: state.t + dt,
                detail: format!(
                    "non-finite potential at x = {:.6}",
                    self.config.grid().point(k)
                ),
            });
        }
        let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut reanchor = 0.0;
        if top < -self.config.tol_zero() {
            reanchor = -top;
            for v in next.iter_mut() {
                *v -= top;
            }
        }
        let phi = TraitField::raw(*self.config.grid(), next, FieldRole::Potential);
        self.state_at(solver, state.t + dt, phi, reanchor)
    }

    pub fn run(&self) -> LimitTrajectory {
        let mut solver = ActiveSetSolver::new();
        let v = self.speed_bound().unwrap_or(f64::NAN);
        let mut out = LimitTrajectory {
            samples: Vec::new(),
            events: Vec::new(),
            failure: None,
            dt: self.dt,
            speed_bound: v,
        };
        let mut state = match self.initial_state(&mut solver) {
            Ok(s) => s,
            Err(e) => {
                out.failure = Some(e);
                return out;
            }
        };
        let gap = self.config.merge_gap_cells;
        out.samples.push(LimitSample {
            record: limit_record(&state, 0.0, gap),
            state: state.clone(),
        });
        let horizon = self.config.horizon;
        let n_intervals = (horizon / self.config.sample_dt - 1e-9).ceil().max(0.0) as usize;
        for k in 1..=n_intervals {
            let t_target = (k as f64 * self.config.sample_dt).min(horizon);
            let span = t_target - state.t;
            let n_steps = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
            let dt = span / n_steps as f64;
            let mut reanchor_total = 0.0;
            for _ in 0..n_steps {
                match self.step(&mut solver, &state, dt) {
                    Ok(next) => {
                        reanchor_total += next.reanchor;
                        state = next;
                    }
                    Err(e) => {
                        out.failure = Some(e);
                        out.events = detect_branching(&out.samples, self.config.persist_samples);
                        return out;
                    }
                }
            }
            state.t = t_target;
            out.samples.push(LimitSample {
                record: limit_record(&state, reanchor_total, gap),
                state: state.clone(),
            });
        }
        out.events = detect_branching(&out.samples, self.config.persist_samples);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSample {
    pub state: LimitState,
    pub record: DiagnosticsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingEvent {
    pub t: f64,
    /// Zero-set components before and after, as `[a, b]` intervals.
    pub before: Vec<(f64, f64)>,
    pub after: Vec<(f64, f64)>,
    /// Rate of change of the distance between the two daughter components
    /// over the following samples.
    pub separation_speed: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LimitTrajectory {
    pub samples: Vec<LimitSample>,
    pub events: Vec<BranchingEvent>,
    pub failure: Option<Error>,
    pub dt: f64,
    pub speed_bound: f64,
}

impl LimitTrajectory {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Components of `mask`, merging those separated by at most `gap_cells`
/// empty cells, as closed intervals.
pub fn merged_components(mask: &SetMask, gap_cells: usize) -> Vec<(f64, f64)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (a, b) in mask.components() {
        match out.last_mut() {
            Some(last) if a - last.1 - 1 <= gap_cells => last.1 = b,
            _ => out.push((a, b)),
        }
    }
    let g = mask.grid();
    out.into_iter()
        .map(|(a, b)| (g.point(a), g.point(b)))
        .collect()
}

/// Position of each zero-set component: the centroid of the atoms it
/// carries, or its midpoint when it carries none.
fn positions(sample: &LimitSample) -> Vec<f64> {
    let half = 0.5 * sample.state.phi.grid().spacing();
    let atoms = sample.record.atoms.atoms();
    sample
        .record
        .components
        .iter()
        .map(|&(a, b)| {
            let inside = atoms
                .iter()
                .filter(|at| at.x >= a - half && at.x <= b + half);
            let (m, mx) = inside.fold((0.0, 0.0), |(m, mx), at| (m + at.mass, mx + at.mass * at.x));
            if m > 0.0 {
                mx / m
            } else {
                0.5 * (a + b)
            }
        })
        .collect()
}

fn nearest(points: &[f64], x: f64) -> Option<f64> {
    points
        .iter()
        .copied()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}

/// Rises in the zero-set component count that persist for `persist` further
/// samples. Daughters are located by the atoms they carry; the separation
/// speed is a finite difference of their distance over up to ten following
/// samples.
pub fn detect_branching(samples: &[LimitSample], persist: usize) -> Vec<BranchingEvent> {
    let counts: Vec<usize> = samples.iter().map(|s| s.record.components.len()).collect();
    let mut events = Vec::new();
    let mut settled = counts.first().copied().unwrap_or(0);
    for k in 1..samples.len() {
        if counts[k] > settled {
            let end = (k + persist).min(samples.len() - 1);
            if (k..=end).all(|j| counts[j] >= counts[k]) && k + persist < samples.len() {
                let parents = positions(&samples[k - 1]);
                let parent = parents.iter().sum::<f64>() / parents.len().max(1) as f64;
                // the two daughters nearest to the parent
                let mut daughters = positions(&samples[k]);
                daughters.sort_by(|a, b| (a - parent).abs().total_cmp(&(b - parent).abs()));
                let separation_speed = if daughters.len() >= 2 {
                    let (mut x1, mut x2) = (
                        daughters[0].min(daughters[1]),
                        daughters[0].max(daughters[1]),
                    );
                    let d0 = x2 - x1;
                    let last = (k + 10).min(samples.len() - 1);
                    for s in &samples[k + 1..=last] {
                        let p = positions(s);
                        x1 = nearest(&p, x1).unwrap_or(x1);
                        x2 = nearest(&p, x2).unwrap_or(x2);
                    }
                    (last > k)
                        .then(|| ((x2 - x1) - d0) / (samples[last].state.t - samples[k].state.t))
                } else {
                    None
                };
                events.push(BranchingEvent {
                    t: samples[k].state.t,
                    before: samples[k - 1].record.components.clone(),
                    after: samples[k].record.components.clone(),
                    separation_speed,
                });
                settled = counts[k];
            }
        } else if counts[k] < settled {
            let end = (k + persist).min(samples.len() - 1);
            if (k..=end).all(|j| counts[j] <= counts[k]) {
                settled = counts[k];
            }
        }
    }
    events
}
