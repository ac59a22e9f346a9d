use thiserror::Error;

/// Errors raised by the sampler, the diagnostics and the finite-state verifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target has positive density where the instrumental density is zero{}", at_step(*.step))]
    DominationViolation { step: Option<usize> },
    #[error("non-finite replication weight {value}{}", at_step(*.step))]
    NonFiniteWeight { value: f64, step: Option<usize> },
    #[error("log-density returned NaN")]
    NanDensity,
    #[error("tempering exponent must lie in (0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("state index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("law `{0}` has no closed-form pmf")]
    UnsupportedLaw(&'static str),
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("replication counts sum to zero")]
    EmptyChain,
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("centering violated: |pi_tilde^T f| = {0:e} exceeds 1e-10")]
    MeanNotZero(f64),
    #[error("degenerate asymptotic variance")]
    DegenerateVariance,
    #[error("accepted point {state} has zero acceptance probability")]
    ZeroAcceptance { state: usize },
    /// Raised for reducible or periodic chains, whose invariant law is not
    /// unique or not reached by iteration.
    #[error("no unique limiting distribution after {iterations} iterations (residual {residual:e}): {cause}")]
    NonConvergence { iterations: usize, residual: f64, cause: String },
    #[error("replication support {needed} exceeds n_max = {n_max}")]
    SupportTooSmall { needed: usize, n_max: usize },
    #[error("finite spec invalid: {0}")]
    InvalidSpec(String),
    #[error("state space of size {0} exceeds the dense verifier limit of 2000")]
    TooLarge(usize),
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ImcError {
    fn from(e: std::io::Error) -> Self {
        ImcError::Io(e.to_string())
    }
}

fn at_step(step: Option<usize>) -> String {
    step.map(|s| format!(" at step {s}")).unwrap_or_default()
}

impl ImcError {
    /// Attaches the index of the offending sampler step.
    pub fn at(self, k: usize) -> Self {
        match self {
            ImcError::DominationViolation { .. } => ImcError::DominationViolation { step: Some(k) },
            ImcError::NonFiniteWeight { value, .. } => ImcError::NonFiniteWeight { value, step: Some(k) },
            other => other,
        }
    }
}

pub type Result<T, E = ImcError> = std::result::Result<T, E>;
