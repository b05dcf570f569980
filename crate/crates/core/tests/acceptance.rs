//! End-to-end acceptance criteria. Runs as a plain binary so every line is
//! printed whether or not it passes; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use acmo::diagnostics::{appendix_sweep, default_beta_grid, default_sweep_indices};
use acmo::harness::{acmo_sgd_deviation, run_experiment, run_sweep, run_with_problem, sample_output_index, SweepSpec};
use acmo::problems::{LogisticSpec, MlpSpec, Remainder, RosenbrockSpec, StochasticQuadraticSpec, PROBLEM_NAMES};
use acmo::{
    build_problem, AlphaSchedule, DecayMode, ExperimentConfig, OptimizerSpec, ParamVector, Problem, ProblemSpec, Rng,
    ScheduleSpec,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SANDWICH_RUNTIME: Duration = Duration::from_secs(60);
const THEOREM_RUNTIME: Duration = Duration::from_secs(300);
const IDENTITY_MAX: f64 = 1e-9;
const AUXILIARY_MAX: f64 = 1e-10;
const REDUCTION_MAX: f64 = 1e-12;
const FD_REL_MAX: f64 = 1e-5;
const CHI2_P_MIN: f64 = 0.01;
const ADAPTIVE_MARGIN: f64 = 1.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(
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

fn quadratic_box() -> ProblemSpec {
    ProblemSpec::Quadratic(StochasticQuadraticSpec::default())
}

fn quadratic_free() -> ProblemSpec {
    ProblemSpec::Quadratic(StochasticQuadraticSpec {
        box_half_width: None,
        ..Default::default()
    })
}

fn logistic() -> ProblemSpec {
    ProblemSpec::Logistic(LogisticSpec::default())
}

fn shipped_problems() -> Vec<ProblemSpec> {
    let all = vec![
        quadratic_box(),
        logistic(),
        ProblemSpec::Rosenbrock(RosenbrockSpec::default()),
        ProblemSpec::Mlp(MlpSpec::default()),
    ];
    assert_eq!(all.len(), PROBLEM_NAMES.len());
    all
}

fn mini_batch(p: &dyn Problem) -> Option<usize> {
    (p.n_samples() >= 8).then(|| p.n_samples() / 8)
}

fn worst(result: &acmo::RunResult, name: &str) -> (f64, bool, usize) {
    let r = result
        .merged_reports()
        .into_iter()
        .find(|r| r.name == name)
        .unwrap_or_else(|| panic!("report {name} missing"));
    (r.worst_slack, r.violated, r.n_steps)
}

/// Criteria 1 and 2 share their runs: every shipped problem in both modes,
/// five seeds, `T = 10⁴`.
fn sandwich_and_cap() -> (Outcome, Outcome) {
    let start = Instant::now();
    let (mut a1_worst, mut a1_bad, mut a1_steps) = (f64::INFINITY, false, 0);
    let (mut cap_worst, mut cap_bad, mut cap_steps) = (f64::INFINITY, false, 0);
    for spec in shipped_problems() {
        let problem = build_problem(&spec).expect("problem builds");
        for theory in [false, true] {
            let schedule = if theory {
                ScheduleSpec::theory()
            } else {
                ScheduleSpec::practical(AlphaSchedule::Constant {
                    alpha0: 0.5 / problem.meta().lipschitz,
                })
            };
            let mut cfg = config(spec.clone(), OptimizerSpec::Acmo, schedule, 10_000);
            cfg.batch_size = mini_batch(problem.as_ref());
            cfg.trials = 5;
            cfg.checks = vec!["lemma_a1".into()];
            if theory {
                cfg.checks.push("corollary_a1".into());
            }
            let res = run_with_problem(&cfg, problem.as_ref()).expect("run succeeds");
            let (w, v, n) = worst(&res, "lemma_a1");
            a1_worst = a1_worst.min(w);
            a1_bad |= v;
            a1_steps += n;
            if theory {
                let (w, v, n) = worst(&res, "corollary_a1");
                cap_worst = cap_worst.min(w);
                cap_bad |= v;
                cap_steps += n;
            }
        }
    }
    let elapsed = start.elapsed();
    (
        outcome(
            !a1_bad && elapsed < SANDWICH_RUNTIME,
            format!(
                "{a1_steps} steps, worst scaled slack {a1_worst:.3e}, {:.1} s",
                elapsed.as_secs_f64()
            ),
        ),
        outcome(
            !cap_bad && cap_steps > 0,
            format!("{cap_steps} theory-mode steps, smallest margin to 1/12 {cap_worst:.3e}"),
        ),
    )
}

fn theorem_bound() -> Outcome {
    let start = Instant::now();
    let mut cfg = config(quadratic_box(), OptimizerSpec::Acmo, ScheduleSpec::theory(), 100_001);
    cfg.batch_size = Some(8);
    cfg.checks = vec!["theorem_bound".into(), "rate".into()];
    cfg.rate_window = Some([100, 100_000]);
    let res = run_experiment(&cfg).expect("run succeeds");
    let (bound_slack, bound_bad, n) = worst(&res, "theorem_bound");
    let (rate_slack, rate_bad, _) = worst(&res, "rate");
    let slope = acmo::diagnostics::RATE_SLOPE_MAX - rate_slack;
    let elapsed = start.elapsed();
    outcome(
        !bound_bad && !rate_bad && elapsed < THEOREM_RUNTIME,
        format!(
            "{n} checked steps, smallest relative slack {bound_slack:.3e}, min-so-far slope {slope:.3}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn constructed_sequence() -> Outcome {
    let mut cfg = config(quadratic_box(), OptimizerSpec::Acmo, ScheduleSpec::theory(), 101);
    cfg.batch_size = Some(8);
    cfg.checks = vec!["constructed_sequence".into()];
    let res = run_experiment(&cfg).expect("run succeeds");
    let (slack, _, n) = worst(&res, "constructed_sequence");
    let residual = -slack;
    outcome(
        residual <= IDENTITY_MAX,
        format!("{n} identities, max residual {residual:.3e}"),
    )
}

fn sufficient_descent() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    let mut runs = 0;
    let mut bad = false;
    for spec in [quadratic_free(), logistic()] {
        let problem = build_problem(&spec).expect("problem builds");
        let inv_l = 1.0 / problem.meta().lipschitz;
        for beta in [0.5, 0.9, 1.0] {
            for batch in [None, Some(8)] {
                let mut schedule = ScheduleSpec::practical(AlphaSchedule::Constant { alpha0: inv_l });
                schedule.beta = Some(beta);
                let mut cfg = config(spec.clone(), OptimizerSpec::Acmo, schedule, 500);
                cfg.batch_size = batch;
                cfg.checks = vec!["sufficient_descent".into()];
                let res = run_with_problem(&cfg, problem.as_ref()).expect("run succeeds");
                let (w, v, _) = worst(&res, "sufficient_descent");
                worst_slack = worst_slack.min(w);
                bad |= v;
                runs += 1;
            }
        }
    }
    outcome(
        !bad,
        format!("{runs} runs of 499 steps, worst scaled decrease {worst_slack:.3e}"),
    )
}

fn auxiliary_optimality() -> Outcome {
    let mut largest = 0.0_f64;
    let mut steps = 0;
    for (spec, theory) in [(logistic(), false), (quadratic_free(), false), (quadratic_free(), true)] {
        let problem = build_problem(&spec).expect("problem builds");
        let schedule = if theory {
            ScheduleSpec::theory()
        } else {
            ScheduleSpec::practical(AlphaSchedule::Constant {
                alpha0: 0.5 / problem.meta().lipschitz,
            })
        };
        let mut cfg = config(spec, OptimizerSpec::Acmo, schedule, 101);
        cfg.batch_size = Some(8);
        cfg.trials = 4;
        cfg.checks = vec!["auxiliary_optimality".into()];
        let res = run_with_problem(&cfg, problem.as_ref()).expect("run succeeds");
        let (w, _, n) = worst(&res, "auxiliary_optimality");
        largest = largest.max(-w);
        steps += n;
    }
    outcome(
        steps >= 1000 && largest <= AUXILIARY_MAX,
        format!("{steps} steps, largest auxiliary gradient norm {largest:.3e}"),
    )
}

/// Projected SGD reference driven by the same batch sequence as the harness.
fn sgd_reference(problem: &dyn Problem, alpha: f64, steps: usize, batch: usize, seed: u64) -> Vec<ParamVector> {
    let n = problem.n_samples();
    let mut rng = Rng::new(seed, 0);
    let alphas = vec![alpha; steps];
    sample_output_index(&alphas, &mut rng).expect("valid step sizes");
    let mut sampler = acmo::problems::BatchSampler::new(n, batch, Remainder::Drop, rng).expect("valid batch");
    let mut theta = problem.initial_point();
    let mut out = vec![theta.clone()];
    for _ in 0..steps {
        let b = sampler.next_batch();
        let g = problem.minibatch_gradient(&theta, &b).expect("valid batch");
        theta.axpy_in_place(-alpha, &g).expect("same dimension");
        theta = problem.project(&theta);
        out.push(theta.clone());
    }
    out
}

fn reductions() -> Outcome {
    let problem = build_problem(&logistic()).expect("problem builds");
    let alpha = 0.5 / problem.meta().lipschitz;
    let reference = sgd_reference(problem.as_ref(), alpha, 100, 16, 3);
    let mut worst = 0.0_f64;
    for (opt, beta) in [
        (OptimizerSpec::Acmo, Some(0.0)),
        (OptimizerSpec::SgdMomentum { momentum: 0.0 }, None),
    ] {
        let mut schedule = ScheduleSpec::practical(AlphaSchedule::Constant { alpha0: alpha });
        schedule.beta = beta;
        let mut cfg = config(logistic(), opt, schedule, 101);
        cfg.batch_size = Some(16);
        cfg.seed = 3;
        cfg.store_vectors = true;
        let res = run_with_problem(&cfg, problem.as_ref()).expect("run succeeds");
        let traj = &res.trials[0].trajectory;
        for (t, expected) in reference.iter().enumerate() {
            let got = traj.theta(t + 1).expect("stored iterate");
            let dev = got
                .iter()
                .zip(expected.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
    }
    let quad = build_problem(&quadratic_box()).expect("problem builds");
    let tiny = acmo_sgd_deviation(
        quad.as_ref(),
        AlphaSchedule::Constant { alpha0: 0.01 },
        1e-300,
        100,
        Some(8),
        0,
    )
    .expect("run succeeds");
    worst = worst.max(tiny);
    outcome(
        worst <= REDUCTION_MAX,
        format!("max coordinate deviation {worst:.3e} over 100 steps"),
    )
}

fn memory() -> Outcome {
    let d = 1000;
    let count = |name: &str| {
        OptimizerSpec::from_name(name)
            .expect("registered")
            .build(d)
            .expect("builds")
            .memory_report()
    };
    let (acmo, adam, ams) = (count("acmo"), count("adam"), count("amsgrad"));
    outcome(
        acmo.buffers == 1 && adam.buffers == 2 && ams.buffers == 3 && acmo.scalars < d + 8,
        format!(
            "acmo {} buffer ({} scalars), adam {}, amsgrad {}",
            acmo.buffers, acmo.scalars, adam.buffers, ams.buffers
        ),
    )
}

fn scalar_sweep() -> Outcome {
    let grid = default_beta_grid();
    let indices = default_sweep_indices();
    let reports = appendix_sweep(&grid, &indices);
    let bad: Vec<_> = reports.iter().filter(|r| r.violated).map(|r| r.name.clone()).collect();
    let worst = reports.iter().map(|r| r.worst_slack).fold(f64::INFINITY, f64::min);
    let total: usize = reports.iter().map(|r| r.n_steps).sum();
    outcome(
        bad.is_empty() && grid.len() == 200,
        format!(
            "{} inequalities, {total} evaluations, worst slack {worst:.3e} {bad:?}",
            reports.len()
        ),
    )
}

/// Central differences on the full loss with `h = 1e-5·(1 + |θ_i|)`.
fn central_difference(p: &dyn Problem, theta: &ParamVector) -> ParamVector {
    let mut g = ParamVector::zeros(theta.dim());
    for i in 0..theta.dim() {
        let h = 1e-5 * (1.0 + theta[i].abs());
        let mut up = theta.clone();
        up[i] += h;
        let mut down = theta.clone();
        down[i] -= h;
        g[i] = (p.full_loss(&up).unwrap() - p.full_loss(&down).unwrap()) / (2.0 * h);
    }
    g
}

fn gradient_oracles() -> Outcome {
    let mut worst = 0.0_f64;
    let mut points = 0;
    for spec in shipped_problems() {
        let problem = build_problem(&spec).expect("problem builds");
        let region = problem
            .feasible_box()
            .cloned()
            .unwrap_or_else(|| acmo::BoxSet::cube(problem.dim(), 2.0).unwrap());
        let mut rng = Rng::new(11, 0);
        for _ in 0..100 {
            let theta = region.sample(&mut rng);
            let g = problem.full_gradient(&theta).unwrap();
            let fd = central_difference(problem.as_ref(), &theta);
            let rel = g.sub(&fd).unwrap().norm() / g.norm().max(1e-8);
            worst = worst.max(rel);
            points += 1;
        }
    }
    outcome(
        worst <= FD_REL_MAX,
        format!("{points} points, worst relative error {worst:.3e}"),
    )
}

fn chi_square_p(alphas: &[f64], draws: usize, rng: &mut Rng) -> f64 {
    let mut counts = vec![0usize; alphas.len()];
    for _ in 0..draws {
        let o = sample_output_index(alphas, rng).expect("valid step sizes");
        counts[o - 2] += 1;
    }
    let total: f64 = alphas.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(alphas)
        .map(|(&c, a)| {
            let e = draws as f64 * a / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((alphas.len() - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

fn output_sampler() -> Outcome {
    let mut rng = Rng::new(2024, 7);
    let constant = vec![0.1; 10];
    let inv_sqrt: Vec<f64> = (1..50).map(|t| 0.3 / (t as f64).sqrt()).collect();
    let decay: Vec<f64> = (1..=20).map(|t| 0.5f64.powi((t - 1) / 5)).collect();
    let ps: Vec<f64> = [&constant, &inv_sqrt, &decay]
        .iter()
        .map(|a| chi_square_p(a, 100_000, &mut rng))
        .collect();
    outcome(
        ps.iter().all(|&p| p > CHI2_P_MIN),
        format!(
            "p-values {:.3} / {:.3} / {:.3} over 10^5 draws each",
            ps[0], ps[1], ps[2]
        ),
    )
}

fn comparative() -> Outcome {
    let mut cfg = config(
        logistic(),
        OptimizerSpec::Acmo,
        ScheduleSpec::practical(AlphaSchedule::Constant { alpha0: 0.01 }),
        5000,
    );
    cfg.batch_size = Some(32);
    cfg.trials = 3;
    cfg.sweep = Some(SweepSpec {
        optimizers: ["acmo", "adam", "amsgrad", "sgd_momentum"]
            .iter()
            .map(|n| OptimizerSpec::from_name(n).unwrap())
            .collect(),
        alpha0: vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1],
    });
    let points = run_sweep(&cfg).expect("sweep succeeds");
    let best = |name: &str| {
        points
            .iter()
            .filter(|p| p.optimizer.name() == name)
            .map(|p| p.result.final_loss_stats().0)
            .fold(f64::INFINITY, f64::min)
    };
    let (acmo, adam, ams, sgdm) = (best("acmo"), best("adam"), best("amsgrad"), best("sgd_momentum"));
    let adaptive = adam.min(ams);
    let near_adaptive = acmo <= ADAPTIVE_MARGIN * adaptive;
    let below_sgdm = acmo < sgdm;
    outcome(
        near_adaptive && below_sgdm,
        format!(
            "best final loss: acmo {acmo:.7}, adam/amsgrad {adaptive:.7} (within 5%: {near_adaptive}), \
             sgd_momentum {sgdm:.7} (acmo below: {below_sgdm})"
        ),
    )
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

fn main() {
    let (c1, c2) = sandwich_and_cap();
    let criteria: Vec<Criterion> = vec![
        (
            "moment sandwich on every shipped problem and mode",
            Box::new(move || c1),
        ),
        ("moment coefficient at most 1/12 in theory mode", Box::new(move || c2)),
        (
            "averaged gradient bound and rate on the boxed quadratic",
            Box::new(theorem_bound),
        ),
        ("constructed-sequence identity", Box::new(constructed_sequence)),
        ("sufficient descent with step 1/L", Box::new(sufficient_descent)),
        (
            "auxiliary-problem optimality of the step",
            Box::new(auxiliary_optimality),
        ),
        ("reductions to plain SGD", Box::new(reductions)),
        ("optimizer state buffers", Box::new(memory)),
        ("scalar inequality sweep", Box::new(scalar_sweep)),
        (
            "analytic gradients against central differences",
            Box::new(gradient_oracles),
        ),
        ("randomized output index distribution", Box::new(output_sampler)),
        ("logistic training loss against tuned baselines", Box::new(comparative)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.into_iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
