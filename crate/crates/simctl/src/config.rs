//! Experiment configuration files.
//!
//! A config is TOML with the sections `[grid]`, `[environment]`, `[kernels]`,
//! `[correction]`, `[time]`, `[initial]` and `[output]`, plus optional
//! per-command sections `[forward]`, `[limit]`, `[ess]`, `[sweep]`,
//! `[ghost]` and `[bounds]`. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use selmut::{
    AprioriConstants, CompetitionFamily, CompetitionKernel, CorrectionSpec, EnvironmentSpec,
    EssTolerances, Flux, Grid, InitialProfile, LimitConfig, MutationFamily, MutationKernel,
    RateProfile, ReplicatorParams, SetMask, SimConfig, DEFAULT_MERGE_GAP,
};

use crate::presets;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub name: String,
    pub grid: GridSection,
    pub environment: EnvironmentSection,
    pub kernels: KernelsSection,
    #[serde(default = "CorrectionSpec::off")]
    pub correction: CorrectionSpec,
    pub time: TimeSection,
    pub initial: InitialProfile,
    #[serde(default)]
    pub forward: ForwardSection,
    #[serde(default)]
    pub limit: LimitSection,
    #[serde(default)]
    pub ess: EssSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub ghost: Option<GhostSection>,
    /// Frozen a priori constants checked by `run-eps`.
    #[serde(default)]
    pub bounds: Option<AprioriConstants>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub rate: RateProfile,
    /// `r <= -r0` outside `[-radius, radius]`.
    pub radius: f64,
    pub r0: f64,
    /// `r > 0` on `(-inner_radius, inner_radius)`.
    pub inner_radius: f64,
    #[serde(default)]
    pub switch: Option<SwitchSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSection {
    pub t: f64,
    pub rate: RateProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsSection {
    pub competition: CompetitionFamily,
    pub mutation: MutationFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub sample_dt: f64,
    /// Forward step; the largest stable divisor of `sample_dt` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    pub eps: f64,
    pub p_max: f64,
    #[serde(default)]
    pub mass_max: Option<f64>,
}

impl Default for ForwardSection {
    fn default() -> Self {
        ForwardSection {
            eps: 0.05,
            p_max: 10.0,
            mass_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSection {
    pub p_max: f64,
    pub dt: Option<f64>,
    pub tol_zero: Option<f64>,
    pub merge_gap_cells: usize,
    pub persist_samples: usize,
    pub flux: Flux,
    pub tol_eq: f64,
    pub tol_ineq: f64,
}

impl Default for LimitSection {
    fn default() -> Self {
        let tols = EssTolerances::default();
        LimitSection {
            p_max: 8.0,
            dt: None,
            tol_zero: None,
            merge_gap_cells: DEFAULT_MERGE_GAP,
            persist_samples: 2,
            flux: Flux::default(),
            tol_eq: tols.tol_eq,
            tol_ineq: tols.tol_ineq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EssSection {
    /// Admissible set `[a, b]`; the whole grid when absent.
    pub omega: Option<[f64; 2]>,
    pub tol_eq: f64,
    pub tol_ineq: f64,
    pub n_inits: usize,
    pub tv_tol: f64,
    pub max_iters: usize,
}

impl Default for EssSection {
    fn default() -> Self {
        let tols = EssTolerances::default();
        EssSection {
            omega: None,
            tol_eq: tols.tol_eq,
            tol_ineq: tols.tol_ineq,
            n_inits: 8,
            tv_tol: 1e-3,
            max_iters: ReplicatorParams::default().max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    /// Zero-set matching tolerance of the comparison report.
    pub delta: f64,
    /// Calibration inflation of the a priori constants at the first `ε`.
    pub margin: f64,
    pub level_depth: f64,
    /// Largest allowed ratio of cumulative dissipation across the sweep.
    pub dissipation_factor: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps: vec![0.05, 0.02, 0.01],
            delta: 0.1,
            margin: 2.0,
            level_depth: 0.5,
            dissipation_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhostSection {
    pub probe: [f64; 2],
    pub reemergence_level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Write a snapshot CSV every this many samples; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { snapshot_every: 1 }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file, or a shipped preset given as `preset:<name>`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let s = path.to_string_lossy();
        if let Some(name) = s.strip_prefix("preset:") {
            let text = presets::get(name)
                .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
            return Self::parse(text);
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form, so formatting, comments and key
    /// order do not change it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?)
    }

    pub fn environment(&self) -> Result<EnvironmentSpec, CliError> {
        let grid = self.grid()?;
        let e = &self.environment;
        let mut env = EnvironmentSpec::new(e.rate.sample(&grid)?, e.radius, e.r0, e.inner_radius);
        if let Some(sw) = &e.switch {
            env = env.with_switch(sw.t, sw.rate.sample(&grid)?);
        }
        Ok(env)
    }

    pub fn competition(&self, seed: u64) -> Result<CompetitionKernel, CliError> {
        let grid = self.grid()?;
        Ok(CompetitionKernel::new(self.kernels.competition.clone())?.certify_on(&grid, 64, seed))
    }

    pub fn mutation(&self) -> Result<MutationKernel, CliError> {
        Ok(MutationKernel::new(self.kernels.mutation)?)
    }

    pub fn sim_config(&self, eps: f64, seed: u64) -> Result<SimConfig, CliError> {
        let cfg = SimConfig {
            env: self.environment()?,
            competition: self.competition(seed)?,
            mutation: self.mutation()?,
            correction: self.correction,
            eps,
            horizon: self.time.horizon,
            dt: self.time.dt,
            sample_dt: self.time.sample_dt,
            initial: self.initial.clone(),
            p_max: self.forward.p_max,
            mass_max: self.forward.mass_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn limit_config(&self, seed: u64) -> Result<LimitConfig, CliError> {
        let l = &self.limit;
        let cfg = LimitConfig {
            env: self.environment()?,
            competition: self.competition(seed)?,
            mutation: self.mutation()?,
            correction: self.correction,
            horizon: self.time.horizon,
            dt: l.dt,
            sample_dt: self.time.sample_dt,
            initial: self.initial.clone(),
            p_max: l.p_max,
            tol_zero: l.tol_zero,
            tolerances: EssTolerances {
                tol_eq: l.tol_eq,
                tol_ineq: l.tol_ineq,
            },
            merge_gap_cells: l.merge_gap_cells,
            persist_samples: l.persist_samples,
            flux: l.flux,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn omega(&self) -> Result<SetMask, CliError> {
        let grid = self.grid()?;
        Ok(match self.ess.omega {
            Some([a, b]) => SetMask::interval(grid, a, b),
            None => SetMask::full(grid),
        })
    }

    pub fn replicator_params(&self) -> ReplicatorParams {
        ReplicatorParams {
            max_iters: self.ess.max_iters,
            ..ReplicatorParams::default()
        }
    }

    pub fn ess_tolerances(&self) -> EssTolerances {
        EssTolerances {
            tol_eq: self.ess.tol_eq,
            tol_ineq: self.ess.tol_ineq,
        }
    }
}
