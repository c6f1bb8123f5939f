use thiserror::Error;

use crate::bell::BellIndex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown Bell state name {0:?}")]
    BellState(String),
    #[error("not a two-bit string: {0:?}")]
    BitPair(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("qubit label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("no qubit labelled {0:?}")]
    UnknownLabel(String),
    #[error("a Bell measurement needs two distinct qubits, got {0:?} twice")]
    SameQubit(String),
    #[error("{0} qubits exceeds the limit of {max}", max = crate::statevector::MAX_QUBITS)]
    TooManyQubits(usize),
    #[error("outcome {outcome} has probability {probability:e}, cannot condition on it")]
    ZeroProbability {
        outcome: BellIndex,
        probability: f64,
    },
    #[error("amplitude vector of length {len} does not match {labels} labels")]
    Shape { len: usize, labels: usize },
    #[error("state has norm² {0}, expected 1")]
    NotNormalized(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("protocol step out of order: {0}")]
    OutOfOrder(&'static str),
    #[error("check index {index} out of range for {groups} groups")]
    IndexOutOfRange { index: usize, groups: usize },
    #[error("check request repeats group {0}")]
    DuplicateCheck(usize),
    #[error("{adversary} is only defined for phi+ channels, group {group} declares {declared:?}")]
    UnsupportedAdversary {
        adversary: &'static str,
        group: usize,
        declared: (BellIndex, BellIndex),
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("uniformity test needs at least 40 observations, got {0}")]
    InsufficientCounts(u64),
    #[error("monte carlo needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
