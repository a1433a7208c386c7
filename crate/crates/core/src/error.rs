use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a precondition that the types cannot express.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed model input, with the offending field.
    #[error("{field}: {message}")]
    Structure { field: String, message: String },

    /// The environment violates the admissibility condition on atoms.
    #[error("inadmissible environment: {0}")]
    Inadmissible(String),

    #[error("discretization failure at r = {time}: component {component} reached {value:e}; refine the grid")]
    Discretization { time: f64, component: usize, value: f64 },

    #[error("non-finite value at r = {time}")]
    Overflow { time: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn structure(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Structure { field: field.into(), message: message.into() }
    }
}
