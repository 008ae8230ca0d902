//! Studies built on the solver: the two-law comparison at the reference
//! constants, the `eps -> 0` sweep, the comparison-principle harness and the
//! manufactured-solution convergence study.
//!
//! Independent runs execute on the rayon pool; results are always collected
//! in input order, so nothing depends on scheduling.

mod comparison;
mod convergence;
mod fig1;
mod sweep;

pub use comparison::{
    check_pair, comparison_config, comparison_harness, random_pair, ComparisonReport, PairOutcome,
    Violation, COMPARISON_TOLERANCE,
};
pub use convergence::{
    convergence_config, convergence_study, ConvergenceRow, ConvergenceTable, Manufactured,
    StudyScheme,
};
pub use fig1::{fig1_config, fig1_experiment, Fig1Claims, Fig1Result, FIG1_GAMMA};
pub use sweep::{
    epsilon_sweep, sweep_config, FrontErrorPoint, SweepResult, AB_MIN_TIME, DEFAULT_EPSILONS,
};

use thiserror::Error;

use crate::config::ValidationError;
use crate::solver::SolverError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("{label}: {source}")]
    Run { label: String, source: SolverError },
    #[error(transparent)]
    Config(#[from] ValidationError),
    #[error("{0}")]
    InvalidInput(String),
}

impl ExperimentError {
    fn run(label: impl Into<String>) -> impl FnOnce(SolverError) -> Self {
        let label = label.into();
        move |source| Self::Run { label, source }
    }

    /// The underlying solver error, if the experiment failed in a run.
    pub fn solver_error(&self) -> Option<&SolverError> {
        match self {
            Self::Run { source, .. } => Some(source),
            _ => None,
        }
    }
}
