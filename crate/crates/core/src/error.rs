use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension {0} is below 3")]
    DimensionTooSmall(usize),

    #[error("grid truncation radius {r_max} overflows the Gaussian weight")]
    WeightOverflow { r_max: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {got} values but the grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field value at cell {index} is not finite")]
    NonFinite { index: usize },

    #[error("exponent q = {q} is outside [2, {two_star}]")]
    ExponentOutOfRange { q: f64, two_star: f64 },

    #[error("Hardy coupling mu = {mu} is outside [0, {max}]")]
    CouplingOutOfRange { mu: f64, max: f64 },

    #[error("quotient undefined for the zero field")]
    ZeroField,

    #[error("ray never meets the Nehari set (A = {a}, B = {b})")]
    NoCrossing { a: f64, b: f64 },

    #[error("grid spacing {spacing} is too coarse, need at most {required}")]
    InsufficientResolution { spacing: f64, required: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("descent failed: {0}")]
    DescentFailure(String),

    #[error("no sample landed in the requested level set ({samples} drawn)")]
    NoKeepers { samples: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
