//! Numerical core for selection-mutation dynamics with nonlocal competition
//! in the small-mutation (Hopf-Cole) scaling.

pub mod competition;
pub mod correction;
pub mod diagnostics;
pub mod environment;
pub mod error;
pub mod ess;
pub mod forward;
pub mod grid;
pub mod limit;
pub mod measure;
pub mod mutation;

pub use competition::{
    convolve, convolve_measure, CompetitionFamily, CompetitionKernel, ConvolutionPlan, Positivity,
};
pub use correction::{correction_build, CorrectionField, CorrectionMode, CorrectionSpec};
pub use diagnostics::{
    check_apriori, dissipation_update, eps_limit_comparison, ghost_population_probe,
    max_zero_set_speed, AprioriConstants, BoundCheck, BoundReport, ComparisonReport, ComparisonRow,
    DiagnosticsRecord, GhostReport, GhostRun, DEFAULT_MERGE_GAP,
};
pub use environment::{EnvironmentSpec, GaussianBump, RateProfile};
pub use error::{Error, Result};
pub use ess::{
    ess_active_set, ess_replicator, ess_replicator_from, ess_uniqueness_probe, ess_verify,
    near_root_measure, ActiveSetSolver, EssCertificate, EssTolerances, ReplicatorOutcome,
    ReplicatorParams, UniquenessReport,
};
pub use forward::{
    ForwardSample, InitialProfile, Peak, SimConfig, SimState, Simulator, Trajectory,
};
pub use grid::{distance_to_set, semi_distance, FieldRole, Grid, SetMask, TraitField};
pub use limit::{
    detect_branching, numerical_hamiltonian, numerical_hamiltonian_flux, support_speed_bound,
    BranchingEvent, Flux, LimitConfig, LimitSample, LimitSimulator, LimitState, LimitTrajectory,
};
pub use measure::{Atom, DiscreteMeasure};
pub use mutation::{MutationFamily, MutationKernel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/competition.md")]
    mod competition {}
    #[doc = include_str!("../../../book/src/correction.md")]
    mod correction {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/limit.md")]
    mod limit {}
    #[doc = include_str!("../../../book/src/ess.md")]
    mod ess {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
