use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("channel has an empty input or output alphabet")]
    EmptyAlphabet,
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("entry ({row}, {col}) is not a finite number")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} sums to {sum}, not 1")]
    NonStochastic { row: usize, sum: f64 },
    #[error("input distribution is invalid: {0}")]
    BadDistribution(String),
    #[error("bad channel parameter: {0}")]
    BadParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("capacity iteration did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("capacity-achieving input distribution is not unique")]
    MultiCaidUnsupported,
    #[error("channel is not singular")]
    NotSingular,
    #[error("channel is not symmetric")]
    NotSymmetric,
    #[error("q_Q does not dominate W(.|{input}) at output {output}")]
    DominationFailure { input: usize, output: usize },
    #[error("enumeration needs {required} composition vectors, budget is {budget}")]
    EnumerationBudgetExceeded { required: u128, budget: u64 },
    #[error("exhaustive enumeration of {required} words exceeds the limit {limit}")]
    TooLarge { required: u128, limit: u64 },
    #[error("input alphabet of size {size} exceeds the grid search limit {limit}")]
    DimensionTooLarge { size: usize, limit: usize },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("W(S_R|x_o^n) = {w_sr} does not exceed eps = {eps}")]
    TauOutOfRange { w_sr: f64, eps: f64 },
    #[error("radius search exhausted without a net-verified delta (last delta {last_delta:e})")]
    NetTooCoarse { last_delta: f64 },
    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),
}

impl Error {
    /// Coarse error category, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            EmptyAlphabet | Ragged { .. } | NegativeEntry { .. } | NonFinite { .. }
            | NonStochastic { .. } | BadDistribution(_) | BadParameter(_) | InvalidArgument(_) => {
                ErrorKind::Validation
            }
            MultiCaidUnsupported | NotSingular | NotSymmetric | DominationFailure { .. }
            | DimensionTooLarge { .. } | NotApplicable(_) | TauOutOfRange { .. }
            | HypothesisFailure(_) => ErrorKind::NotApplicable,
            NoConvergence { .. } | EnumerationBudgetExceeded { .. } | TooLarge { .. }
            | NetTooCoarse { .. } => ErrorKind::Budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    NotApplicable,
    Budget,
}
