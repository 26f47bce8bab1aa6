use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("both constraints active at node {node} (t = {t}); r - l gap is violated")]
    GapViolation { node: usize, t: f64 },

    #[error("root not bracketed after {expansions} expansions (last bracket [{lo}, {hi}])")]
    RootBracketFailure { lo: f64, hi: f64, expansions: usize },

    #[error("bisection stalled at x = {x} with residual {residual}")]
    RootTolerance { x: f64, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("regression normal equations are rank deficient at step {step}")]
    RegressionSingular { step: usize },

    #[error("non-finite value at node {node}, particle {particle}")]
    NonFiniteValue { node: usize, particle: usize },

    #[error("ensemble mismatch: {0}")]
    EnsembleMismatch(String),

    #[error("terminal condition violates the mean constraints: E[L(T,xi)] = {mean_l}, E[R(T,xi)] = {mean_r}, slack = {slack}")]
    TerminalInadmissible { mean_l: f64, mean_r: f64, slack: f64 },

    #[error("Picard iteration did not reach tolerance after {} iterations (last delta {:?})", history.len(), history.last())]
    PicardNotConverged { history: Vec<f64> },
}
