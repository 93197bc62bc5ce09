//! Explicit integration of the ε-level dynamics in the potential `φ_ε = ε log u_ε`:
//!
//! ```text
//! ∂t φ = r - I ⋆ u - D + H_ε(φ),    u = exp(φ / ε)
//! ```
//!
//! The density is always recomputed from `φ`, never stepped.

use serde::{Deserialize, Serialize};

use crate::competition::{CompetitionKernel, ConvolutionPlan, Positivity};
use crate::correction::{correction_build, CorrectionSpec};
use crate::diagnostics::{forward_record, DiagnosticsRecord};
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::grid::{FieldRole, Grid, TraitField};
use crate::mutation::{MutationKernel, MAX_EXPONENT};

/// One concave cap `height - curvature (x - center)^2` of the initial potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    #[serde(default)]
    pub height: f64,
    pub curvature: f64,
}

/// `φ⁰ = max_i q_i`, each `q_i` a quadratic cap continued linearly once its
/// slope reaches `slope_cap`, so `φ⁰` is Lipschitz and semiconcave.
/// With `mass` set, `φ⁰` is shifted by a constant so that `∫ e^{φ⁰/ε} = mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProfile {
    pub peaks: Vec<Peak>,
    #[serde(default)]
    pub slope_cap: Option<f64>,
    #[serde(default)]
    pub mass: Option<f64>,
}

impl InitialProfile {
    pub fn single(center: f64, curvature: f64) -> Self {
        InitialProfile {
            peaks: vec![Peak {
                center,
                height: 0.0,
                curvature,
            }],
            slope_cap: None,
            mass: None,
        }
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn with_slope_cap(mut self, cap: f64) -> Self {
        self.slope_cap = Some(cap);
        self
    }

    fn cap_value(&self, p: &Peak, x: f64) -> f64 {
        let d = (x - p.center).abs();
        match self.slope_cap {
            Some(s) if p.curvature > 0.0 && 2.0 * p.curvature * d > s => {
                p.height - s * d + s * s / (4.0 * p.curvature)
            }
            _ => p.height - p.curvature * d * d,
        }
    }

    /// `ε`-independent part of `φ⁰`.
    pub fn shape(&self, x: f64) -> f64 {
        self.peaks
            .iter()
            .map(|p| self.cap_value(p, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn build(&self, grid: &Grid, eps: f64) -> Result<TraitField> {
        if self.peaks.is_empty() {
            return Err(Error::hypothesis(
                "initial",
                "initial profile needs at least one peak",
            ));
        }
        if self.peaks.iter().any(|p| !(p.curvature >= 0.0)) {
            return Err(Error::hypothesis(
                "initial",
                "peak curvatures must be nonnegative",
            ));
        }
        let mut phi = TraitField::from_fn(*grid, FieldRole::Potential, |x| self.shape(x))?;
        if let Some(m) = self.mass {
            if !(m > 0.0) {
                return Err(Error::hypothesis(
                    "initial",
                    format!("initial mass must be positive, got {m}"),
                ));
            }
            let top = phi.max();
            let rel: f64 = phi
                .values()
                .iter()
                .map(|p| ((p - top) / eps).exp())
                .sum::<f64>()
                * grid.spacing();
            // ∫ e^{(φ + s)/ε} = m  with  ∫ e^{φ/ε} = e^{top/ε} rel
            let shift = eps * m.ln() - top - eps * rel.ln();
            phi = TraitField::raw(
                *grid,
                phi.values().iter().map(|p| p + shift).collect(),
                FieldRole::Potential,
            );
        }
        Ok(phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub env: EnvironmentSpec,
    pub competition: CompetitionKernel,
    pub mutation: MutationKernel,
    pub correction: CorrectionSpec,
    pub eps: f64,
    pub horizon: f64,
    /// Fixed step; `None` picks the largest stable step dividing `sample_dt`.
    pub dt: Option<f64>,
    pub sample_dt: f64,
    pub initial: InitialProfile,
    /// Slope bound entering the stability rule.
    pub p_max: f64,
    /// Mass bound entering the stability rule; defaults from the environment.
    pub mass_max: Option<f64>,
}

impl SimConfig {
    pub fn grid(&self) -> &Grid {
        self.env.grid()
    }

    fn default_mass_max(&self) -> f64 {
        let i0 = self.competition.eval(0.0);
        let from_env = if i0 > 0.0 {
            2.0 * self.env.max_rate().max(0.0) / i0
        } else {
            0.0
        };
        let from_initial = self.initial.mass.unwrap_or(0.0);
        from_env.max(from_initial).max(1.0)
    }

    /// `dt_max = min(0.2 ε / (‖r‖ + ‖I‖ m_max + D0 + H(p_max) + ∫K), 0.5 ε)`.
    pub fn dt_max(&self) -> Result<f64> {
        let i_sup = self.competition.sup_norm(self.grid().width());
        let m = self.mass_max.unwrap_or_else(|| self.default_mass_max());
        let h = self
            .mutation
            .hamiltonian(self.p_max)?
            .max(self.mutation.hamiltonian(-self.p_max)?);
        let rate = self.env.sup_rate()
            + i_sup * m
            + self.correction.max_rate()
            + h
            + self.mutation.moment0();
        Ok((0.2 * self.eps / rate).min(0.5 * self.eps))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::NonPositiveEpsilon(self.eps));
        }
        self.env.validate()?;
        if self.competition.positivity() == Positivity::Failed {
            return Err(Error::hypothesis(
                "strongcompet",
                "competition kernel failed the positive quadratic form check",
            ));
        }
        self.correction.validate(&self.env, self.eps)?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::hypothesis(
                "time",
                format!("horizon must be finite and >= 0, got {}", self.horizon),
            ));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::hypothesis(
                "time",
                format!("sample_dt must be positive, got {}", self.sample_dt),
            ));
        }
        if !(self.p_max > 0.0) {
            return Err(Error::hypothesis(
                "stability",
                format!("p_max must be positive, got {}", self.p_max),
            ));
        }
        if let Some(dt) = self.dt {
            let dt_max = self.dt_max()?;
            if !(dt > 0.0 && dt <= dt_max * (1.0 + 1e-12)) {
                return Err(Error::hypothesis(
                    "stability",
                    format!("dt = {dt} outside (0, dt_max = {dt_max:.3e}]"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phi: TraitField,
    pub u: TraitField,
    pub mass: f64,
    pub d: TraitField,
    /// `{φ >= -f_ε}` was empty when `d` was built.
    pub empty_support: bool,
}

/// Everything the right-hand side needs besides `φ`, cached per run.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    plan: ConvolutionPlan,
    dt: f64,
}

fn density(phi: &TraitField, eps: f64) -> Result<TraitField> {
    let mut values = Vec::with_capacity(phi.values().len());
    for (k, p) in phi.values().iter().enumerate() {
        let e = p / eps;
        if !e.is_finite() {
            return Err(Error::NonFinite {
                what: "potential",
                index: k,
            });
        }
        if e > MAX_EXPONENT {
            return Err(Error::ExponentOverflow {
                x: phi.grid().point(k),
                exponent: e,
            });
        }
        values.push(e.exp());
    }
    Ok(TraitField::raw(*phi.grid(), values, FieldRole::Density))
}

/// Parts of the right-hand side at one state.
#[derive(Debug, Clone)]
pub struct RhsParts {
    pub u: TraitField,
    pub competition: TraitField,
    pub d: TraitField,
    pub heps: TraitField,
    pub rhs: TraitField,
    pub empty_support: bool,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let dt_max = config.dt_max()?;
        let dt = match config.dt {
            Some(dt) => dt,
            None => config.sample_dt / (config.sample_dt / dt_max).ceil(),
        };
        let plan = ConvolutionPlan::new(config.competition.clone(), *config.grid());
        Ok(Simulator { config, plan, dt })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn eps(&self) -> f64 {
        self.config.eps
    }

    pub fn threshold(&self) -> f64 {
        self.config.correction.threshold(self.config.eps)
    }

    pub fn plan(&self) -> &ConvolutionPlan {
        &self.plan
    }

    pub fn initial_state(&self) -> Result<SimState> {
        let phi = self
            .config
            .initial
            .build(self.config.grid(), self.config.eps)?;
        self.state_at(0.0, phi)
    }

    pub fn state_at(&self, t: f64, phi: TraitField) -> Result<SimState> {
        let eps = self.config.eps;
        let u = density(&phi, eps)?;
        let mass = u.integral();
        let d = correction_build(&self.config.correction, &phi, eps)?;
        Ok(SimState {
            t,
            phi,
            u,
            mass,
            d: d.field,
            empty_support: d.empty_support,
        })
    }

    pub fn rhs_parts(&self, t: f64, phi: &TraitField) -> Result<RhsParts> {
        let eps = self.config.eps;
        let u = density(phi, eps)?;
        let competition = self.plan.apply(&u)?;
        let d = correction_build(&self.config.correction, phi, eps)?;
        let heps = self.config.mutation.heps_apply(phi, eps)?;
        let r = self.config.env.rate_at(t);
        let rhs = r
            .values()
            .iter()
            .zip(competition.values())
            .zip(d.field.values())
            .zip(heps.values())
            .map(|(((r, c), d), h)| r - c - d + h)
            .collect();
        Ok(RhsParts {
            rhs: TraitField::raw(*phi.grid(), rhs, FieldRole::Rate),
            u,
            competition,
            d: d.field,
            heps,
            empty_support: d.empty_support,
        })
    }

    /// `r - I ⋆ u - D + H_ε(φ)` at the state's time.
    pub fn rhs_phi(&self, state: &SimState) -> Result<TraitField> {
        Ok(self.rhs_parts(state.t, &state.phi)?.rhs)
    }

    /// `(1/ε) ∫ (r - I⋆u)^2 u dx` at one state.
    pub fn dissipation_rate(&self, t: f64, parts: &RhsParts) -> f64 {
        let r = self.config.env.rate_at(t);
        let h = self.config.grid().spacing();
        r.values()
            .iter()
            .zip(parts.competition.values())
            .zip(parts.u.values())
            .map(|((r, c), u)| (r - c).powi(2) * u)
            .sum::<f64>()
            * h
            / self.config.eps
    }

    /// One Heun step; also returns the trapezoidal dissipation increment.
    pub fn step_with_dissipation(&self, state: &SimState, dt: f64) -> Result<(SimState, f64)> {
        let t = state.t;
        let k1 = self.rhs_parts(t, &state.phi)?;
        let predictor: Vec<f64> = state
            .phi
            .values()
            .iter()
            .zip(k1.rhs.values())
            .map(|(p, k)| p + dt * k)
            .collect();
        let predictor = self.checked(t + dt, predictor)?;
        let k2 = self.rhs_parts(t + dt, &predictor)?;
        let next: Vec<f64> = state
            .phi
            .values()
            .iter()
            .zip(k1.rhs.values().iter().zip(k2.rhs.values()))
            .map(|(p, (a, b))| p + 0.5 * dt * (a + b))
            .collect();
        let phi = self.checked(t + dt, next)?;
        let dissipation =
            0.5 * dt * (self.dissipation_rate(t, &k1) + self.dissipation_rate(t + dt, &k2));
        Ok((self.state_at(t + dt, phi)?, dissipation))
    }

    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        Ok(self.step_with_dissipation(state, dt)?.0)
    }

    fn checked(&self, t: f64, values: Vec<f64>) -> Result<TraitField> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                t,
                detail: format!(
                    "non-finite potential at x = {:.6}",
                    self.config.grid().point(k)
                ),
            });
        }
        Ok(TraitField::raw(
            *self.config.grid(),
            values,
            FieldRole::Potential,
        ))
    }

    /// Integrates to the horizon, sampling every `sample_dt` and at the end.
    pub fn run(&self) -> Trajectory {
        let mut samples = Vec::new();
        let mut state = match self.initial_state() {
            Ok(s) => s,
            Err(e) => {
                return Trajectory {
                    samples,
                    failure: Some(e),
                    dt: self.dt,
                }
            }
        };
        let mut dissipation = 0.0;
        let horizon = self.config.horizon;
        let sample =
            |state: &SimState, dissipation: f64, samples: &mut Vec<ForwardSample>| -> Result<()> {
                let record = forward_record(self, state, dissipation)?;
                samples.push(ForwardSample {
                    state: state.clone(),
                    record,
                });
                Ok(())
            };
        if let Err(e) = sample(&state, dissipation, &mut samples) {
            return Trajectory {
                samples,
                failure: Some(e),
                dt: self.dt,
            };
        }
        let n_intervals = (horizon / self.config.sample_dt - 1e-9).ceil().max(0.0) as usize;
        for k in 1..=n_intervals {
            let t_target = (k as f64 * self.config.sample_dt).min(horizon);
            let span = t_target - state.t;
            let n_steps = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
            let dt = span / n_steps as f64;
            for _ in 0..n_steps {
                match self.step_with_dissipation(&state, dt) {
                    Ok((next, inc)) => {
                        state = next;
                        dissipation += inc;
                    }
                    Err(e) => {
                        return Trajectory {
                            samples,
                            failure: Some(e),
                            dt: self.dt,
                        }
                    }
                }
            }
            state.t = t_target;
            if let Err(e) = sample(&state, dissipation, &mut samples) {
                return Trajectory {
                    samples,
                    failure: Some(e),
                    dt: self.dt,
                };
            }
        }
        Trajectory {
            samples,
            failure: None,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSample {
    pub state: SimState,
    pub record: DiagnosticsRecord,
}

/// Sampled trajectory; `failure` is set when the run stopped early.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<ForwardSample>,
    pub failure: Option<Error>,
    pub dt: f64,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> Option<&ForwardSample> {
        self.samples.last()
    }

    pub fn records(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        self.samples.iter().map(|s| &s.record)
    }
}
