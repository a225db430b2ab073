use thiserror::Error;

/// Errors raised by the inference routines.
///
/// Every variant carries a stable machine-readable code (see [`Error::code`])
/// so front ends can report failures without parsing messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cell ({i}, {j}) is not observed")]
    MissingData { i: usize, j: usize },

    #[error("duplicate record for cell ({i}, {j}){}", l.map(|l| format!(", l = {l}")).unwrap_or_default())]
    DuplicateCell { i: usize, j: usize, l: Option<usize> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient dimension: need N > 2p, got N = {n_obs}, p = {p}")]
    InsufficientDimension { n_obs: usize, p: usize },

    #[error("alpha = {alpha} is below the p-value resolution 1/(K+1) = {floor}")]
    Resolution { alpha: f64, floor: f64 },

    #[error("mask is {rows}x{cols}, above the exact solver cap of {cap}; use the greedy solver")]
    CapExceeded { rows: usize, cols: usize, cap: usize },

    #[error("mask has no observed cells")]
    EmptyMask,

    #[error("unbalanced design: {0}")]
    Unbalanced(String),

    #[error("no cell holds at least L0 = {l0} observations")]
    NoEligibleCells { l0: usize },

    #[error("phi1 + phi2 must be < 1 (got {phi1} + {phi2})")]
    VarianceBudget { phi1: f64, phi2: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingData { .. } => "E_MISSING_DATA",
            Error::DuplicateCell { .. } => "E_DUPLICATE_CELL",
            Error::Dimension(_) => "E_DIMENSION",
            Error::DegenerateInput(_) => "E_DEGENERATE_INPUT",
            Error::InsufficientDimension { .. } => "E_INSUFFICIENT_DIMENSION",
            Error::Resolution { .. } => "E_RESOLUTION",
            Error::CapExceeded { .. } => "E_CAP_EXCEEDED",
            Error::EmptyMask => "E_EMPTY_MASK",
            Error::Unbalanced(_) => "E_UNBALANCED",
            Error::NoEligibleCells { .. } => "E_NO_ELIGIBLE_CELLS",
            Error::VarianceBudget { .. } => "E_VARIANCE_BUDGET",
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            Error::Replicate { source, .. } => source.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
