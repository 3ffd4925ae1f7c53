use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("query ({t}, {s}) lies outside the tabulated grid [0, {horizon}]")]
    OutOfRange { t: f64, s: f64, horizon: f64 },

    #[error("size {n} exceeds the configured cap {cap} for {what}")]
    SizeCap { what: &'static str, n: usize, cap: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("matrix is not positive semidefinite within the jitter budget (last pivot {pivot:e} at row {row})")]
    NotPsd { row: usize, pivot: f64 },

    #[error("series diverges for H = {0} (requires H < 3/4)")]
    DivergentSeries(f64),

    #[error("H = {0} is outside the range covered by the rate theorem (0, 3/4]")]
    OutOfTheorem(f64),

    #[error("unsupported function: {0}")]
    UnsupportedFunction(String),

    #[error("enumeration over {0} variables is too large (at most 3 supported)")]
    Complexity(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {need} points, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("ordering error: expected k < l, got k = {k}, l = {l}")]
    Ordering { k: usize, l: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
