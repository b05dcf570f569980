use std::hint::black_box;

use acmo::problems::LogisticSpec;
use acmo::{
    run_experiment, AlphaSchedule, ExperimentConfig, OptimizerSpec, ParamVector, ProblemSpec, ScheduleSet,
    ScheduleSpec, StepInput,
};
use acmo_bench::gradient;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const OPTIMIZERS: &[&str] = &["acmo", "sgd_momentum", "adam", "amsgrad"];

fn single_step(c: &mut Criterion) {
    let sched = ScheduleSet::practical(AlphaSchedule::Constant { alpha0: 1e-3 }, 0.9, 1e-8).unwrap();
    let mut group = c.benchmark_group("step");
    for &d in &[16usize, 1024, 65_536] {
        let theta = ParamVector::zeros(d);
        let grads = [gradient(d, 1), gradient(d, 2)];
        for name in OPTIMIZERS {
            let mut opt = OptimizerSpec::from_name(name).unwrap().build(d).unwrap();
            let mut t = 1;
            group.bench_with_input(BenchmarkId::new(*name, d), &d, |b, _| {
                b.iter(|| {
                    let g = &grads[t % 2];
                    let out = opt.step(&StepInput::new(&theta, g, t), &sched, None).unwrap();
                    t += 1;
                    black_box(out)
                })
            });
        }
    }
    group.finish();
}

fn logistic_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("logistic_500_steps");
    group.sample_size(20);
    for name in OPTIMIZERS {
        let cfg = ExperimentConfig {
            problem: ProblemSpec::Logistic(LogisticSpec::default()),
            optimizer: OptimizerSpec::from_name(name).unwrap(),
            schedule: ScheduleSpec::practical(AlphaSchedule::Constant { alpha0: 0.01 }),
            iterations: 501,
            batch_size: Some(32),
            remainder: Default::default(),
            weight_decay: 0.0,
            decay_mode: Default::default(),
            trials: 1,
            seed: 0,
            checks: Vec::new(),
            store_vectors: false,
            rate_window: None,
            parallel: false,
            output: Default::default(),
            sweep: None,
        };
        group.bench_function(*name, |b| b.iter(|| black_box(run_experiment(&cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, single_step, logistic_run);
criterion_main!(benches);
