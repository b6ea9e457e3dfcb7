use thiserror::Error;

/// Errors raised by walk construction and evolution.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A requested size exceeds a memory guard or an allowed range.
    #[error("size error: {0}")]
    Size(String),

    /// Edge-list text could not be parsed.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parameter lies outside its documented domain.
    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    /// A matrix that must be unitary is not.
    #[error("matrix is not unitary (max deviation {max_deviation:e})")]
    NotUnitary { max_deviation: f64 },

    /// A numerical contract (norm, trace, support) was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested channel or observable is not defined for this graph or mode.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An input configuration is degenerate (e.g. start equals target).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// State and operator dimensions disagree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// Step halving failed to reach the requested tolerance.
    #[error("integration did not converge after {halvings} halvings (residual {residual:e})")]
    Integration { halvings: u32, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        message: message.into(),
    }
}
