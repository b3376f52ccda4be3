use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a precondition.
    #[error("invalid `{key}`: {rule}")]
    Config { key: String, rule: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite value detected at time step {step}")]
    NonFinite { step: usize },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(key: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            rule: rule.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::Step { .. } | Error::NonFinite { .. }) => e,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        }
    }
}
