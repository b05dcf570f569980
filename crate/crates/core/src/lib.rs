//! Angle-calibrated moment (ACMo) optimization with a baseline optimizer
//! family, synthetic finite-sum problems and numerical convergence
//! diagnostics.

pub mod diagnostics;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod schedules;

pub use diagnostics::{BoundReport, DiagnosticsError, StoredStep, TrajectoryRecord, TrajectoryRow};
pub use harness::{run_experiment, ExperimentConfig, HarnessError, RunResult};
pub use linalg::{axpy, dot, l2_norm, LinalgError, ParamVector, SymMatrix};
pub use optim::{DecayMode, MemoryReport, OptimError, Optimizer, OptimizerSpec, StepInput, StepRecord};
pub use problems::{build_problem, BoxSet, MiniBatch, Problem, ProblemError, ProblemSpec, SmoothnessMeta};
pub use rng::Rng;
pub use schedules::{AlphaSchedule, Mode, ScheduleError, ScheduleSet, ScheduleSpec};
