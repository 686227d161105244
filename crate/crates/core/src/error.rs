use thiserror::Error;

/// Errors raised by measure construction, TV evaluation and the constant optimizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input at index {index}: {value}")]
    NonFiniteInput { index: usize, value: f64 },

    #[error("measure has no atoms with positive weight")]
    EmptyMeasure,

    #[error("negative weight at index {index}: {value}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("zero probability at index {index}")]
    ZeroProbability { index: usize },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("convolution would produce {requested} atom pairs, cap is {cap}")]
    AtomBudgetExceeded { requested: u128, cap: usize },

    #[error("enumeration of {requested} outcomes exceeds cap {cap}")]
    EnumerationBudgetExceeded { requested: u128, cap: usize },

    #[error("mixture weights invalid: {0}")]
    WeightMismatch(String),

    #[error("smoothing parameter must lie in (0, 1), got {0}")]
    BadDelta(f64),

    #[error("measure is not admissible: integrals (e^x, e^-x) = ({plus}, {minus})")]
    NotAdmissible { plus: f64, minus: f64 },

    #[error("delta({eps}) = {delta} is not below 1")]
    DeltaTooLarge { eps: f64, delta: f64 },

    #[error("no feasible epsilon on the grid")]
    NoFeasiblePoint,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("ratio {ratio} exceeds the proven bound {bound}")]
    TheoremViolation { ratio: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
