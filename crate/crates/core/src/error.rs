use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("cycle detected involving node `{0}`")]
    Cycle(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("CPD of node `{node}` does not normalize in row {row}: {detail}")]
    NonNormalizing { node: String, row: usize, detail: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter `{name}` = {value} outside its domain [{min}, {max}]")]
    OutOfDomain {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("joint state space too large ({0} states)")]
    StateSpaceTooLarge(u128),
    #[error("conditioning on a zero-probability event")]
    ZeroProbability,
    #[error("invalid action `{0}`")]
    InvalidAction(String),
    #[error("overlapping node sets")]
    OverlappingSets,
    #[error("boundary parameters not allowed: {0}")]
    Boundary(String),
    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("singular equilibrium Jacobian (condition number {0:.3e})")]
    SingularJacobian(f64),
    #[error("fold detected at path parameter {0}")]
    FoldDetected(f64),
    #[error("finite-difference step jumped branches (profile distance {0:.3e})")]
    BranchJump(f64),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("zero vector: {0}")]
    ZeroVector(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("empty generator list")]
    EmptyGenerators,
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

pub type Result<T> = std::result::Result<T, Error>;
