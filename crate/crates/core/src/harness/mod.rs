//! Config-driven experiment runner: seeded trials, the randomized output
//! iterate, diagnostic dispatch, and CSV/JSON artifacts.

mod config;
mod io;
mod run;

pub use config::{ExperimentConfig, OutputSpec, SweepSpec, SEED_ENV};
pub use io::{emit_csv, parse_csv, summary_json, write_csv, write_outputs, write_sweep_outputs, CSV_HEADER};
pub use run::{
    acmo_equals_sgd_when_beta_zero, acmo_sgd_deviation, run_check, run_experiment, run_sweep, run_trajectory,
    run_with_problem, sample_output_index, sweep_configs, RunResult, SweepPoint, TrialResult, TrialSetup,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::diagnostics::{DiagnosticsError, CHECK_NAMES};
use crate::optim::{OptimError, OPTIMIZER_NAMES};
use crate::problems::{ProblemError, PROBLEM_NAMES};
use crate::schedules::ScheduleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("trial {trial} diverged at step {t}")]
    Diverged { trial: usize, t: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Names accepted in configs, grouped by registry.
pub fn registries() -> [(&'static str, &'static [&'static str]); 3] {
    [
        ("problems", PROBLEM_NAMES),
        ("optimizers", OPTIMIZER_NAMES),
        ("checks", CHECK_NAMES),
    ]
}
