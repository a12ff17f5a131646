use thiserror::Error;

/// Errors produced by network construction, inference and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("self-loop on node-layer {0}")]
    SelfLoop(usize),

    #[error("intralayer edge ({0}, {1}) joins node-layers in different layers")]
    CrossLayerIntraEdge(usize, usize),

    #[error("interlayer edge ({0}, {1}) joins node-layers in the same layer")]
    SameLayerInterEdge(usize, usize),

    #[error("edge weight must be finite and positive, got {0}")]
    InvalidWeight(f64),

    #[error("network has no intralayer edges")]
    EmptyNetwork,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("label {label} not below community count {q}")]
    LabelOutOfRange { label: usize, q: usize },

    #[error("negative probability {value} in row {row}")]
    NegativeProbability { row: usize, value: f64 },

    #[error("non-finite value while updating message on directed edge {edge}")]
    NonFinite { edge: usize },

    #[error("excess degree {0} <= 1: the factorized solution never destabilizes")]
    NoThreshold(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),

    #[error("cost matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
