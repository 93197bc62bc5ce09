//! Experiment driver for `selmut`: TOML configs, shipped presets, run
//! orchestration and on-disk outputs.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod presets;

pub use commands::{cmd_compare, cmd_ess, cmd_run_eps, cmd_run_limit, cmd_sweep, RunOptions};
pub use config::Config;
pub use manifest::{Outcome, RunManifest};

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// The run completed but a reported check failed.
    CheckFailed = 1,
    InvalidConfig = 2,
    NumericAbort = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("hypothesis ({0}) violated: {1}")]
    Hypothesis(&'static str, String),
    #[error("numeric: {0}")]
    Numeric(selmut::Error),
    #[error("io: {0}")]
    Io(String),
}

impl From<selmut::Error> for CliError {
    fn from(e: selmut::Error) -> Self {
        match e {
            selmut::Error::Hypothesis { hypothesis, detail } => {
                CliError::Hypothesis(hypothesis, detail)
            }
            selmut::Error::InvalidGrid(d) | selmut::Error::InvalidKernel(d) => CliError::Config(d),
            selmut::Error::NonPositiveEpsilon(eps) => {
                CliError::Config(format!("epsilon must be positive, got {eps}"))
            }
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Config(_) | CliError::Hypothesis(..) => Exit::InvalidConfig,
            CliError::Numeric(_) | CliError::Io(_) => Exit::NumericAbort,
        }
    }
}

/// Worker count from `SIMCTL_THREADS`, else rayon's default.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("SIMCTL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        b = b.num_threads(n);
    }
    b.build().expect("thread pool builds")
}
