#![allow(dead_code)]

use acmo::problems::{LogisticSpec, Remainder, StochasticQuadraticSpec};
use acmo::{AlphaSchedule, DecayMode, ExperimentConfig, OptimizerSpec, ProblemSpec, ScheduleSpec};

pub fn config(
    problem: ProblemSpec,
    optimizer: OptimizerSpec,
    schedule: ScheduleSpec,
    iterations: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        optimizer,
        schedule,
        iterations,
        batch_size: None,
        remainder: Remainder::Drop,
        weight_decay: 0.0,
        decay_mode: DecayMode::CoupledL2,
        trials: 1,
        seed: 0,
        checks: Vec::new(),
        store_vectors: false,
        rate_window: None,
        parallel: true,
        output: Default::default(),
        sweep: None,
    }
}

pub fn small_quadratic() -> ProblemSpec {
    ProblemSpec::Quadratic(StochasticQuadraticSpec {
        dim: 4,
        n_samples: 16,
        ..Default::default()
    })
}

pub fn small_logistic() -> ProblemSpec {
    ProblemSpec::Logistic(LogisticSpec {
        dim: 5,
        n_samples: 64,
        ..Default::default()
    })
}

pub fn constant(alpha0: f64) -> ScheduleSpec {
    ScheduleSpec::practical(AlphaSchedule::Constant { alpha0 })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
