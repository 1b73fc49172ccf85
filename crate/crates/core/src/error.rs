use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("regulator equations inconsistent (residual {residual:e})")]
    RegulatorInconsistent { residual: f64 },

    #[error("gain synthesis failed: {0}")]
    Synthesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration [{rule}]: {detail}")]
    Config { rule: &'static str, detail: String },

    #[error("divergence at t={time}: agent {agent}, field `{field}` is not finite")]
    Divergence {
        time: f64,
        agent: usize,
        field: &'static str,
    },

    #[error("offline problem infeasible: {0}")]
    Infeasible(String),

    #[error("offline oracle did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            found,
        }
    }
}
