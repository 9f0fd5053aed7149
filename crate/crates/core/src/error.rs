use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (non-finite input,
    /// empty population, index out of range, wrong model kind, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The fixed-η privacy-constrained program has no feasible point.
    #[error("infeasible: eta = {eta} exceeds the feasibility bound sum(tau) = {bound}")]
    InfeasibleEta { eta: f64, bound: f64 },

    /// No weight vector satisfies the participation constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The structured solver and its oracle disagree.
    #[error("internal consistency: {0}")]
    Inconsistent(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("cancelled")]
    Cancelled,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Schema violation; `path` is the offending field, e.g. `agents[2].tau`.
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for the errors that mean "no feasible point exists".
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::InfeasibleEta { .. } | Error::Infeasible(_))
    }
}
