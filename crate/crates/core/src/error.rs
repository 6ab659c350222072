use thiserror::Error;

use crate::gridworld::{Action, StateId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("goal is unreachable from the start state")]
    UnreachableGoal,
    #[error("state {0:?} is outside the grid")]
    InvalidState(StateId),
    #[error("action {action:?} is not available in state {state:?}")]
    RemovedAction { state: StateId, action: Action },
    #[error("maze parse error on line {line}: {msg}")]
    MazeParse { line: usize, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("Katz series diverges: beta * spectral radius = {0} >= 1")]
    KatzDivergence(f64),
    #[error("rank {d} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange { d: usize, rows: usize, cols: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("node {0:?} has no outgoing edges to walk")]
    DanglingNode(StateId),
    #[error("node {0:?} has neither in- nor out-edges")]
    IsolatedNode(StateId),
    #[error("invalid training spec: {0}")]
    InvalidTrainSpec(String),
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Stats(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
