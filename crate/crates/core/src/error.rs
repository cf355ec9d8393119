use thiserror::Error;

/// Errors raised by the market model and the equilibrium search.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid market configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("strategy matrix is {got_cps}x{got_isps}, market is {want_cps}x{want_isps}")]
    DimensionMismatch {
        got_cps: usize,
        got_isps: usize,
        want_cps: usize,
        want_isps: usize,
    },

    #[error("choice set is empty")]
    EmptyChoiceSet,

    #[error("providers {0:?} do not share one zero-rating profile and cannot be merged")]
    MergeProfileMismatch(Vec<usize>),

    #[error("{cells} strategy cells exceed the enumeration limit of {limit}")]
    Capacity { cells: usize, limit: usize },

    #[error("cell (cp {cp}, isp {isp}) has price 0 and must stay zero-rated")]
    ForcedCellViolated { cp: usize, isp: usize },

    #[error("no equilibrium to select from")]
    EmptyEquilibriumSet,

    #[error("every actual content provider has zero effective users")]
    ZeroShares,
}

pub type Result<T> = std::result::Result<T, ModelError>;
