use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid arena: {0}")]
    InvalidArena(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("colour kind mismatch: {spec} expects {expected}, found {found}")]
    ColourKind { spec: String, expected: String, found: String },
    #[error("payoff {0} is not determined by recurrent classes")]
    NotClassDetermined(String),
    #[error("payoff {spec} is not supported here: {reason}")]
    Unsupported { spec: String, reason: String },
    #[error("inconsistent class summary: {0}")]
    InconsistentClass(String),
    #[error("invalid shuffle: {0}")]
    Shuffle(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("memory automaton is not total: {0}")]
    NotTotal(String),
    #[error("enumeration budget exceeded: {needed} strategy pairs > budget {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("saddle point failure at state {state}: maxmin {maxmin} != minmax {minmax}")]
    SaddlePoint { state: String, maxmin: String, minmax: String },
    #[error("no single pure stationary strategy is optimal from every state")]
    NoUniformOptimum,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid play: {0}")]
    InvalidPlay(String),
    #[error("singular linear system")]
    Singular,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
