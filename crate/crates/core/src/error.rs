use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block structure: q = {q}, m = {m}")]
    InvalidBlockStructure { q: usize, m: usize },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("state-space box has zero diameter")]
    DegenerateBox,

    #[error("linear matrix equation is singular at working precision")]
    SolveFailed,

    #[error("Riccati iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("H is not a nonsingular M-matrix: {0}")]
    NotMMatrix(String),

    #[error("invalid certificate: varrho = {0} is not positive")]
    InvalidCertificate(f64),

    #[error("delay {delta} violates the admissibility limit {limit}")]
    DeltaTooLarge { delta: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample at t = {t} precedes current anchor {anchor}")]
    OutOfOrderSample { t: f64, anchor: f64 },

    #[error("agent {agent} has no estimate of agent {source_agent}")]
    MissingEstimate { agent: usize, source_agent: usize },

    #[error("invalid scenario: {0}")]
    ConfigInvalid(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("numerical blowup at t = {t}: state norm {norm:e} exceeds guard {guard:e}")]
    NumericalBlowup { t: f64, norm: f64, guard: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
