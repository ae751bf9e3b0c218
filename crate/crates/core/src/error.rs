use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance must be odd and ≥ 3 (got {0})")]
    InvalidDistance(usize),
    #[error("rounds must be ≥ 1 (got {0})")]
    InvalidRounds(usize),
    #[error("error rate must lie in [0, 0.5) (got {0})")]
    InvalidErrorRate(f64),
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("error mechanism flipping detectors {detectors:?} (observable flip {observable}) cannot be decomposed into matching-graph edges")]
    Undecomposable { detectors: Vec<usize>, observable: bool },
    #[error("decoding graph needs a circuit with nonzero error rate")]
    NoiselessGraph,
    #[error("ROC-AUC needs both classes present ({positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
