use thiserror::Error;

/// Errors produced anywhere in the clustering pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed edge: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: edge weight must be strictly positive, got {weight}")]
    NonPositiveWeight { line: usize, weight: f64 },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },

    #[error("edge ({i}, {j}) listed with conflicting weights {first} and {second}")]
    ConflictingWeights { i: usize, j: usize, first: f64, second: f64 },

    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no connected sample after {attempts} attempts")]
    RetryBudgetExhausted { attempts: usize },

    #[error("numerical overflow at step {step}")]
    NumericalOverflow { step: usize },

    #[error("trace of length {len} is too short for a {k_rows}x{m_cols} delay embedding")]
    InsufficientSamples { len: usize, k_rows: usize, m_cols: usize },

    #[error("signal is degenerate: every singular value is below tolerance")]
    DegenerateSignal,

    #[error("mode matrix is rank deficient (condition estimate {cond:e})")]
    RankDeficientModes { cond: f64 },

    #[error("Laplacian is not symmetric; the orthonormal expansion does not apply")]
    NotSymmetric,

    #[error("eigendecomposition did not converge")]
    EigenConvergence,

    #[error("{needed} modes required, only {available} available")]
    InsufficientModes { needed: usize, available: usize },

    #[error("no oscillatory FFT bin above the threshold")]
    NoOscillatoryBin,

    #[error("signal is identically zero")]
    ZeroSignal,

    #[error("k = {k} exceeds the number of distinct rows ({distinct})")]
    TooFewDistinctRows { k: usize, distinct: usize },

    #[error("assignments have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("centralized oracle infeasible for {n} nodes (limit {limit})")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalOverflow { .. }
                | Error::DegenerateSignal
                | Error::RankDeficientModes { .. }
                | Error::EigenConvergence
                | Error::InsufficientModes { .. }
                | Error::NoOscillatoryBin
                | Error::ZeroSignal
                | Error::TooFewDistinctRows { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
