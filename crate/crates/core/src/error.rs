use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty sample set")]
    EmptySamples,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("variance {0} is not a tree node at simulation step {1}")]
    OffTree(f64, usize),
    #[error("time {0} outside [0, T]")]
    TimeOutOfRange(f64),
    #[error("non-finite objective {value} at ({x}, {y})")]
    NonFiniteObjective { x: f64, y: f64, value: f64 },
    #[error("step {step}, node {node}: {source}")]
    Node {
        step: usize,
        node: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("missing policy for step {0}")]
    MissingPolicy(usize),
    #[error("step {0} has no incoming-holding axes")]
    NoDeltaAxes(usize),
    #[error("policy parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
