use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or input data.
    #[error("config error: {0}")]
    Config(String),

    /// A parameter lies outside the domain where a construction is defined,
    /// or a hypothesis required by an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The constant chain has no admissible solution for these inputs.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative method stopped before reaching its tolerance.
    #[error("{what} did not converge: {detail}")]
    NonConvergence {
        what: &'static str,
        detail: String,
        history: Vec<f64>,
    },

    /// Non-finite values or a failed numerical check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            Error::Precondition(_) | Error::Infeasible(_) => 2,
            Error::NonConvergence { .. } | Error::Numerical(_) => 3,
        }
    }

    pub(crate) fn non_convergence(what: &'static str, detail: impl Into<String>, history: Vec<f64>) -> Self {
        Error::NonConvergence {
            what,
            detail: detail.into(),
            history,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
