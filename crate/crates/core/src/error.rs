//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("user {user} contributes {count} units, exceeding the tuple bound {bound}")]
    DeltaViolated { user: u64, count: u64, bound: u64 },
    #[error("unit {unit} has weight {weight} outside [0, 1] after normalization")]
    WeightOutOfRange { unit: usize, weight: f64 },
    #[error("unknown user {0}")]
    UnknownUser(u64),
    #[error("sampling probability {0} outside [0, 1]")]
    QOutOfRange(f64),
    #[error("probability {0} outside [0, 1]")]
    POutOfRange(f64),
    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("root finder exceeded {0} iterations")]
    MaxIterations(usize),
    #[error("noise scale {0} is not positive")]
    NonPositiveScale(f64),
    #[error("need more than {needed} values to drop {drop} from each tail, got {got}")]
    TooFewValues { got: usize, drop: usize, needed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("alpha {alpha} too small: rho = {rho} is not positive")]
    AlphaTooSmall { alpha: f64, rho: f64 },
    #[error("no valid Renyi order exists for epsilon={epsilon}, delta={delta}")]
    NoValidAlpha { epsilon: f64, delta: f64 },
    #[error("bracket failure solving h(t)=0: {0}")]
    BracketFailure(String),
    #[error("LP solver failed after {iterations} iterations: {detail}")]
    SolverFailure { iterations: usize, detail: String },
    #[error("QCQP solver did not converge: residual gap {gap}")]
    SolverNonConvergence { gap: f64 },
    #[error("instance too large for the reference oracle: {0}")]
    InstanceTooLarge(String),
    #[error("SVT threshold search exceeded the tau cap {cap}")]
    SvtCapExceeded { cap: f64 },
    #[error("parse error at line {line}: {detail}")]
    ParseError { line: usize, detail: String },
    #[error("self-loop at line {0}")]
    SelfLoop(usize),
    #[error("pattern {0} unsupported for this graph")]
    PatternUnsupported(String),
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),
    #[error("true query value is zero; relative error undefined")]
    ZeroTruth,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
