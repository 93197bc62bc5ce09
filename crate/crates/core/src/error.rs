use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("exponent overflow ({exponent:.3e}) at x = {x:.6}")]
    ExponentOverflow { x: f64, exponent: f64 },

    #[error("slope {slope:.4} at x = {x:.6} exceeds the Lipschitz bound {bound:.4}")]
    SlopeBound { x: f64, slope: f64, bound: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// A hypothesis of the model is violated by the configuration. The tag is
    /// the conventional name of the hypothesis (`boundeta`, `boundpop`,
    /// `strongcompet`, `assdep`, `sizefe`, `stability`).
    #[error("hypothesis ({hypothesis}) violated: {detail}")]
    Hypothesis {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("Gram matrix numerically singular on {size} points (strongcompet violated)")]
    SingularGram { size: usize },

    #[error("active-set budget exceeded: {points} points > {budget}")]
    Budget { points: usize, budget: usize },

    #[error("numerical blow-up at t = {t:.6}: {detail}")]
    Blowup { t: f64, detail: String },

    #[error("ESS solve failed at t = {t:.6}: {detail}")]
    EssFailure { t: f64, detail: String },
}

impl Error {
    pub(crate) fn hypothesis(hypothesis: &'static str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            hypothesis,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
