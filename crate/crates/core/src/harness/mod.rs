//! Online learning loop, regret accounting and run reports.

mod config;
mod report;
mod run;

use thiserror::Error;

use crate::cmdp::CmdpError;
use crate::environments::EnvError;
use crate::estimation::EstimationError;
use crate::planners::PlannerError;

pub use config::{AggRegMode, ConvexPreset, EnvKind, ExperimentConfig, PlannerKind, CONFIG_KEYS};
pub use report::{write_reports, CSV_NAME, MANIFEST_NAME};
pub use run::{
    run_conrl, run_conrl_observed, run_experiment, run_experiment_stream, run_knapsack,
    solve_true_benchmark, solve_true_convex_benchmark, ConvexRegret, EpisodeLog, EpisodeView,
    KnapsackSummary, RegretReport, RunOutput,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Planner(#[from] PlannerError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Env(#[from] EnvError),

    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

impl From<CmdpError> for HarnessError {
    fn from(e: CmdpError) -> Self {
        HarnessError::Planner(PlannerError::Model(e))
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io {
            path: "csv output".into(),
            source: e.into(),
        }
    }
}

impl HarnessError {
    /// Process exit code: 2 configuration, 3 planner, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Env(EnvError::Io { .. }) | HarnessError::Io { .. } => 4,
            HarnessError::Env(_) => 2,
            HarnessError::Planner(PlannerError::Config(_)) => 2,
            HarnessError::Planner(_) => 3,
            HarnessError::Estimation(EstimationError::Config(_)) => 2,
            HarnessError::Estimation(_) => 3,
        }
    }
}
