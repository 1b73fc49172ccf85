//! Scenario files, experiment orchestration and CSV export for `dosim`.

pub mod experiment;
pub mod scenario;

pub use experiment::{run_experiment, run_single, ExperimentPlan, RunArtifacts, RunSummary, SweepAxes};
pub use scenario::{builtin_scenario, load_scenario, resolve_scenario, Overrides, Scenario, ScenarioSpec, VariantKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("simulation diverged: {0}")]
    Divergence(String),
    #[error("offline oracle failed: {0}")]
    Oracle(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Process exit code: 2 validation, 3 divergence, 4 oracle failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Divergence(_) => 3,
            Self::Oracle(_) => 4,
            Self::Other(_) => 1,
        }
    }
}

impl From<dosim::Error> for CliError {
    fn from(e: dosim::Error) -> Self {
        use dosim::Error as E;
        match e {
            E::Divergence { .. } => Self::Divergence(e.to_string()),
            E::NonConvergence { .. } | E::Infeasible(_) => Self::Oracle(e.to_string()),
            E::Config { .. } | E::Precondition(_) | E::Dimension { .. } | E::Structure(_) | E::RegulatorInconsistent { .. } | E::Synthesis(_) => {
                Self::Validation(e.to_string())
            }
            E::Numerical(_) => Self::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Other(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
