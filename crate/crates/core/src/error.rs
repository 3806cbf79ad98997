use thiserror::Error;

/// Errors raised by the engine and its front ends.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("invalid point: {0}")]
    InvalidPoint(f64),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("mixture weights exceed 1 (sum = {0})")]
    MixtureWeightsExceedOne(f64),

    #[error("statistic undefined on empty sample")]
    StatisticOnEmptySample,

    #[error("unknown statistic: {0}")]
    UnknownStatistic(String),

    #[error("invalid parameter for {stat}: {reason}")]
    InvalidParameter { stat: String, reason: String },

    #[error("enumeration too large: {required} compositions exceed budget {budget}")]
    EnumerationTooLarge { required: u128, budget: u64 },

    #[error("too many fixed arguments: {fixed} > M = {m}")]
    TooManyFixed { fixed: usize, m: usize },

    #[error("order exceeds resample size: k = {k} > M = {m}")]
    OrderExceedsResampleSize { k: usize, m: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("slot {slot} out of range 1..={k}")]
    SlotOutOfRange { slot: usize, k: usize },

    #[error("numeric oracle order limit: k = {0} > 4")]
    NumericOrderLimit(usize),

    #[error("superset comparison size limit: N = {0} > 6")]
    SupersetSizeLimit(usize),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by the enumeration budget guard.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::EnumerationTooLarge { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
