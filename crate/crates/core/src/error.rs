use thiserror::Error;

pub type Result<T> = std::result::Result<T, RoughError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoughError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid interval [{start}, {end}]")]
    Interval { start: usize, end: usize },

    #[error("invalid time interval: t = {t} precedes s = {s}")]
    TimeOrder { s: f64, t: f64 },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("negative germ value {value} at grid pair ({i}, {k})")]
    Domain { i: usize, k: usize, value: f64 },

    #[error("control term overflow at grid pair ({i}, {k})")]
    Range { i: usize, k: usize },

    #[error("covariance not positive definite after jitter (smallest eigenvalue {min_eigenvalue:e})")]
    Sampling { min_eigenvalue: f64 },

    #[error("negative Gram quadratic form {0:e}")]
    Numerical(f64),

    #[error("greedy step blocked: cell [{cell}, {}] alone exceeds chi = {chi} (value {value})", cell + 1)]
    GreedyBlocked { cell: usize, chi: f64, value: f64 },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("non-finite germ for remainder ({i}, {l}) on grid pair ({s}, {t})")]
    NonFinite { i: usize, l: usize, s: usize, t: usize },

    #[error("dyadic sums did not converge within {levels} levels (last increment {last:e})")]
    NonConvergence { levels: usize, last: f64, history: Vec<f64> },

    #[error("Picard iteration failed on grid interval [{start}, {end}] after {iterations} iterations")]
    Picard { start: usize, end: usize, iterations: usize, history: Vec<f64> },

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl From<std::io::Error> for RoughError {
    fn from(e: std::io::Error) -> Self {
        RoughError::Io(e.to_string())
    }
}
