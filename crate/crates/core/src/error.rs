use thiserror::Error;

/// Errors raised by the simulation core. Every message is prefixed with the
/// module that raised it so CLI diagnostics can be traced back.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[{module}] domain error: {msg}")]
    Domain { module: &'static str, msg: String },

    #[error("[{module}] singularity: {msg}")]
    Singularity { module: &'static str, msg: String },

    #[error("[swf] expansion invalid: field radius {radius} m must exceed source radius {source_radius} m")]
    ExpansionValidity { radius: f64, source_radius: f64 },

    #[error("[{module}] quadrature did not converge: {msg}")]
    Accuracy { module: &'static str, msg: String },

    #[error("[scatter] ill-conditioned point-matching system (condition estimate {condition:.3e}): {msg}")]
    IllConditioned { condition: f64, msg: String },

    #[error("[{module}] precondition violated: {msg}")]
    Precondition { module: &'static str, msg: String },

    #[error("[stochastic_env] could not place scatterer {index} after {attempts} attempts")]
    Packing { index: usize, attempts: usize },

    #[error("[optim] no convergence after {iterations} iterations (last relative change {last_change:.3e})")]
    Convergence {
        iterations: usize,
        last_change: f64,
        residual_trace: Vec<f64>,
    },

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("[config] {0}")]
    Config(String),

    #[error("[io] {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Tags an error with the Monte-Carlo realization that raised it.
    pub fn in_realization(self, index: usize) -> Self {
        match self {
            Error::Realization { .. } => self,
            other => Error::Realization {
                index,
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn domain(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn singular(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Singularity {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn precondition(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Precondition {
            module,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
