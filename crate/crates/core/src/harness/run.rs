use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentConfig, HarnessError};
use crate::diagnostics::{self, BoundReport, StoredStep, TrajectoryRecord, TrajectoryRow};
use crate::linalg::ParamVector;
use crate::optim::{DecayMode, OptimError, OptimizerSpec, StepInput};
use crate::problems::{build_problem, BatchSampler, MiniBatch, Problem, Remainder};
use crate::rng::Rng;
use crate::schedules::{AlphaSchedule, ScheduleSet, ScheduleSpec};

/// Draws `o ∈ {2, …, T}` with `P(o = i) = α_{i−1} / Σ_τ α_τ`, given
/// `alphas = [α_1, …, α_{T−1}]`.
pub fn sample_output_index(alphas: &[f64], rng: &mut Rng) -> Result<usize, HarnessError> {
    if alphas.is_empty() {
        return Err(HarnessError::Config(
            "output sampling needs at least one step size".into(),
        ));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(HarnessError::Config(format!("step size {a} must be positive")));
    }
    let total: f64 = alphas.iter().sum();
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    for (k, a) in alphas.iter().enumerate() {
        acc += a;
        if target < acc {
            return Ok(k + 2);
        }
    }
    // rounding left the target at the very top of the range
    Ok(alphas.len() + 1)
}

/// Settings shared by every trial of one experiment.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSet,
    pub iterations: usize,
    pub batch_size: Option<usize>,
    pub remainder: Remainder,
    pub weight_decay: f64,
    pub decay_mode: DecayMode,
    pub store_vectors: bool,
}

impl TrialSetup {
    /// Resolves the schedule against the problem's constants and batch layout.
    pub fn from_config(cfg: &ExperimentConfig, problem: &dyn Problem) -> Result<Self, HarnessError> {
        let n = problem.n_samples();
        let steps_per_epoch = match cfg.batch_size {
            Some(b) if b < n => match cfg.remainder {
                Remainder::Drop => n / b,
                Remainder::Pad => n.div_ceil(b),
            },
            _ => 1,
        };
        Ok(Self {
            optimizer: cfg.optimizer,
            schedule: cfg.schedule.build(problem.meta(), steps_per_epoch)?,
            iterations: cfg.iterations,
            batch_size: cfg.batch_size,
            remainder: cfg.remainder,
            weight_decay: cfg.weight_decay,
            decay_mode: cfg.decay_mode,
            store_vectors: cfg.needs_vectors(),
        })
    }

    /// `[α_1, …, α_{T−1}]`.
    pub fn step_sizes(&self) -> Vec<f64> {
        (1..self.iterations).map(|t| self.schedule.alpha_at(t)).collect()
    }
}

enum Batches {
    Full(MiniBatch),
    Sampled(Box<BatchSampler>),
}

impl Batches {
    fn next(&mut self) -> MiniBatch {
        match self {
            Self::Full(b) => b.clone(),
            Self::Sampled(s) => s.next_batch(),
        }
    }
}

/// A finished trial together with the randomized output of the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    #[serde(skip)]
    pub trajectory: TrajectoryRecord,
    pub output_index: usize,
    pub output_loss: f64,
    pub output_grad_norm: f64,
    pub final_loss: f64,
    pub reports: Vec<BoundReport>,
}

/// Runs `T − 1` optimizer steps from the problem's initial point and returns
/// the record with the randomized output `θ_o`. The output index is drawn
/// from `rng` before the remaining stream feeds the batch sampler.
pub fn run_trajectory(
    problem: &dyn Problem,
    setup: &TrialSetup,
    mut rng: Rng,
) -> Result<(TrajectoryRecord, ParamVector), OptimError> {
    let output_index =
        sample_output_index(&setup.step_sizes(), &mut rng).map_err(|e| OptimError::Invalid(e.to_string()))?;
    let n = problem.n_samples();
    let mut batches = match setup.batch_size {
        Some(b) if b < n => Batches::Sampled(Box::new(
            BatchSampler::new(n, b, setup.remainder, rng).map_err(|e| OptimError::Invalid(e.to_string()))?,
        )),
        _ => Batches::Full(MiniBatch::full(n)),
    };
    let mut opt = setup.optimizer.build(problem.dim())?;
    let feasible = problem.feasible_box();
    let mut theta = problem.initial_point();
    let mut rows = Vec::with_capacity(setup.iterations - 1);
    let mut steps = setup.store_vectors.then(|| Vec::with_capacity(setup.iterations - 1));
    let mut theta_o = None;
    let invalid = |e: crate::problems::ProblemError| OptimError::Invalid(e.to_string());

    for t in 1..setup.iterations {
        if t == output_index {
            theta_o = Some(theta.clone());
        }
        let batch = batches.next();
        let start = Instant::now();
        let grad = problem.minibatch_gradient(&theta, &batch).map_err(invalid)?;
        let input = StepInput::new(&theta, &grad, t).with_decay(setup.weight_decay, setup.decay_mode);
        let (next, rec) = opt.step(&input, &setup.schedule, feasible)?;
        let wall_ns = start.elapsed().as_nanos() as u64;

        let loss = problem.full_loss(&theta).map_err(invalid)?;
        let full_grad = problem.full_gradient(&theta).map_err(invalid)?;
        rows.push(TrajectoryRow {
            iter: t,
            loss,
            minibatch_loss: problem.minibatch_loss(&theta, &batch).map_err(invalid)?,
            grad_norm: full_grad.norm(),
            g_norm: rec.g_norm,
            beta_hat: rec.beta_hat,
            mhat_norm: rec.mhat_norm,
            alpha: rec.alpha,
            wall_ns,
        });
        if let Some(steps) = steps.as_mut() {
            let used = match setup.decay_mode {
                DecayMode::CoupledL2 if setup.weight_decay != 0.0 => {
                    grad.add(&theta.scaled(setup.weight_decay)).expect("same dimension")
                }
                _ => grad,
            };
            steps.push(StoredStep {
                theta: theta.clone(),
                grad: used,
                moment: opt.moment().cloned(),
                psi: rec.psi,
                batch,
            });
        }
        theta = next;
    }
    let theta_o = theta_o.unwrap_or_else(|| theta.clone());
    Ok((
        TrajectoryRecord {
            optimizer: opt.name().to_string(),
            mode: setup.schedule.mode,
            rows,
            final_theta: theta,
            output_index: Some(output_index),
            steps,
        },
        theta_o,
    ))
}

/// Runs one named diagnostic against a trajectory. `appendix_sweep` ignores
/// the trajectory.
/// Checks derived from the unprojected update refuse trajectories where the
/// box clipped a step.
fn unprojected(problem: &dyn Problem, traj: &TrajectoryRecord, check: &'static str) -> Result<(), HarnessError> {
    match traj.first_projected_step() {
        Some(t) if problem.feasible_box().is_some() => {
            Err(diagnostics::DiagnosticsError::ProjectionActive { check, t }.into())
        }
        _ => Ok(()),
    }
}

pub fn run_check(
    name: &str,
    problem: &dyn Problem,
    traj: &TrajectoryRecord,
    sched: &ScheduleSet,
    rate_window: Option<[usize; 2]>,
) -> Result<Vec<BoundReport>, HarnessError> {
    let meta = problem.meta();
    let one = |r: Result<BoundReport, diagnostics::DiagnosticsError>| r.map(|r| vec![r]).map_err(HarnessError::from);
    match name {
        "lemma_a1" => one(diagnostics::check_lemma_a1(traj, sched)),
        "corollary_a1" => one(diagnostics::check_corollary_a1(traj)),
        "lemma_a3" => one(diagnostics::check_lemma_a3(traj, meta, sched)),
        "constructed_sequence" => {
            unprojected(problem, traj, "constructed_sequence")?;
            one(diagnostics::check_constructed_sequence(traj))
        }
        "theorem_bound" => one(diagnostics::check_theorem_bound(traj, meta, sched.alpha.alpha0())),
        "rate" => {
            let last = traj.rows.len();
            let [lo, hi] = rate_window.unwrap_or([100.min(last / 10).max(1), last]);
            one(diagnostics::check_rate(traj, lo, hi))
        }
        "sufficient_descent" => {
            unprojected(problem, traj, "sufficient_descent")?;
            one(diagnostics::check_sufficient_descent(problem, traj))
        }
        "auxiliary_optimality" => one(diagnostics::check_auxiliary_optimality(traj)),
        "appendix_sweep" => Ok(diagnostics::appendix_sweep(
            &diagnostics::default_beta_grid(),
            &diagnostics::default_sweep_indices(),
        )),
        other => Err(HarnessError::Config(format!("unknown check `{other}`"))),
    }
}

/// All trials of one experiment, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config_hash: String,
    pub trials: Vec<TrialResult>,
    /// Trajectory-independent reports (the appendix sweep), run once.
    pub shared_reports: Vec<BoundReport>,
}

impl RunResult {
    /// Per-check reports merged across trials: worst slack, any violation,
    /// total step count.
    pub fn merged_reports(&self) -> Vec<BoundReport> {
        let mut merged: Vec<BoundReport> = Vec::new();
        let all = self.trials.iter().flat_map(|t| &t.reports).chain(&self.shared_reports);
        for r in all {
            match merged.iter_mut().find(|m| m.name == r.name) {
                Some(m) => {
                    m.worst_slack = if m.worst_slack.is_nan() || r.worst_slack.is_nan() {
                        f64::NAN
                    } else {
                        m.worst_slack.min(r.worst_slack)
                    };
                    m.violated |= r.violated;
                    m.n_steps += r.n_steps;
                    m.slacks.clear();
                }
                None => {
                    let mut r = r.clone();
                    r.slacks.clear();
                    merged.push(r);
                }
            }
        }
        merged
    }

    pub fn any_violated(&self) -> bool {
        self.merged_reports().iter().any(|r| r.violated)
    }

    /// Mean and (population) standard deviation of the final full loss.
    pub fn final_loss_stats(&self) -> (f64, f64) {
        let n = self.trials.len() as f64;
        let mean = self.trials.iter().map(|t| t.final_loss).sum::<f64>() / n;
        let var = self.trials.iter().map(|t| (t.final_loss - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    setup: &TrialSetup,
    trial: usize,
) -> Result<TrialResult, HarnessError> {
    let rng = Rng::new(cfg.seed, trial as u64);
    let (mut traj, theta_o) = run_trajectory(problem, setup, rng).map_err(|e| match e {
        OptimError::Diverged { t } => HarnessError::Diverged { trial, t },
        other => HarnessError::Optim(other),
    })?;
    let o = traj.output_index.expect("set by run_trajectory");
    let output_loss = problem.full_loss(&theta_o)?;
    let output_grad_norm = problem.full_gradient(&theta_o)?.norm();
    let final_loss = problem.full_loss(&traj.final_theta)?;
    let mut reports = Vec::new();
    for name in cfg.checks.iter().filter(|c| c.as_str() != "appendix_sweep") {
        reports.extend(run_check(name, problem, &traj, &setup.schedule, cfg.rate_window)?);
    }
    if !cfg.store_vectors {
        traj.steps = None;
    }
    Ok(TrialResult {
        trial,
        trajectory: traj,
        output_index: o,
        output_loss,
        output_grad_norm,
        final_loss,
        reports,
    })
}

/// Runs every trial (concurrently when `cfg.parallel`) and the requested
/// checks. Results are ordered by trial index either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let problem = build_problem(&cfg.problem)?;
    run_with_problem(cfg, problem.as_ref())
}

/// [`run_experiment`] on an already-built problem.
pub fn run_with_problem(cfg: &ExperimentConfig, problem: &dyn Problem) -> Result<RunResult, HarnessError> {
    let setup = TrialSetup::from_config(cfg, problem)?;
    // collected in full first so the reported error is the lowest failing trial
    let outcomes: Vec<Result<TrialResult, HarnessError>> = if cfg.parallel {
        (0..cfg.trials)
            .into_par_iter()
            .map(|k| run_trial(cfg, problem, &setup, k))
            .collect()
    } else {
        (0..cfg.trials).map(|k| run_trial(cfg, problem, &setup, k)).collect()
    };
    let trials: Result<Vec<_>, _> = outcomes.into_iter().collect();
    let shared_reports = if cfg.checks.iter().any(|c| c == "appendix_sweep") {
        diagnostics::appendix_sweep(&diagnostics::default_beta_grid(), &diagnostics::default_sweep_indices())
    } else {
        Vec::new()
    };
    Ok(RunResult {
        config_hash: cfg.hash(),
        trials: trials?,
        shared_reports,
    })
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub optimizer: OptimizerSpec,
    pub alpha0: Option<f64>,
    pub result: RunResult,
}

fn with_alpha0(schedule: &ScheduleSpec, alpha0: f64) -> ScheduleSpec {
    let mut s = *schedule;
    s.alpha = Some(match s.alpha {
        Some(AlphaSchedule::Constant { .. }) | None if s.mode == crate::schedules::Mode::Practical => {
            AlphaSchedule::Constant { alpha0 }
        }
        Some(AlphaSchedule::StepDecay { factor, period, .. }) => AlphaSchedule::StepDecay { alpha0, factor, period },
        _ => AlphaSchedule::InvSqrt { alpha0 },
    });
    s
}

/// Expands `cfg.sweep` into one config per (optimizer, α₀) pair. Without a
/// sweep section the config itself is the only point.
pub fn sweep_configs(cfg: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let Some(sweep) = &cfg.sweep else {
        return vec![(cfg.optimizer.name().to_string(), cfg.clone())];
    };
    let alphas: Vec<Option<f64>> = if sweep.alpha0.is_empty() {
        vec![None]
    } else {
        sweep.alpha0.iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    for (k, opt) in sweep.optimizers.iter().enumerate() {
        for a in &alphas {
            let mut c = cfg.clone();
            c.sweep = None;
            c.optimizer = *opt;
            let mut label = format!("{k:02}_{}", opt.name());
            if let Some(a) = a {
                c.schedule = with_alpha0(&cfg.schedule, *a);
                label.push_str(&format!("_a{a:e}"));
            }
            out.push((label, c));
        }
    }
    out
}

/// Runs every point of the sweep grid on one shared problem instance.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>, HarnessError> {
    cfg.validate()?;
    let problem = build_problem(&cfg.problem)?;
    sweep_configs(cfg)
        .into_iter()
        .map(|(label, c)| {
            let result = run_with_problem(&c, problem.as_ref())?;
            Ok(SweepPoint {
                label,
                optimizer: c.optimizer,
                alpha0: c.schedule.alpha.map(|a| a.alpha0()),
                result,
            })
        })
        .collect()
}

/// Largest coordinate deviation between ACMo with moment coefficient `beta`
/// and projected SGD `θ_{t+1} = Π_X(θ_t − α_t g_t)` over `steps` steps on the
/// same batch sequence.
pub fn acmo_sgd_deviation(
    problem: &dyn Problem,
    alpha: AlphaSchedule,
    beta: f64,
    steps: usize,
    batch_size: Option<usize>,
    seed: u64,
) -> Result<f64, HarnessError> {
    let sched = ScheduleSet::practical(alpha, beta, crate::schedules::PRACTICAL_DELTA)?;
    let n = problem.n_samples();
    let mut batches = match batch_size {
        Some(b) if b < n => Batches::Sampled(Box::new(BatchSampler::new(n, b, Remainder::Drop, Rng::new(seed, 0))?)),
        _ => Batches::Full(MiniBatch::full(n)),
    };
    let mut acmo = OptimizerSpec::Acmo.build(problem.dim())?;
    let mut theta = problem.initial_point();
    let mut plain = theta.clone();
    let mut worst = 0.0_f64;
    for t in 1..=steps {
        let batch = batches.next();
        let g = problem.minibatch_gradient(&theta, &batch)?;
        theta = acmo
            .step(&StepInput::new(&theta, &g, t), &sched, problem.feasible_box())?
            .0;
        let g_plain = problem.minibatch_gradient(&plain, &batch)?;
        plain
            .axpy_in_place(-sched.alpha_at(t), &g_plain)
            .expect("same dimension");
        plain = problem.project(&plain);
        let dev = theta
            .iter()
            .zip(plain.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// Whether ACMo with `β ≡ 0` reproduces projected SGD to `1e-15`.
pub fn acmo_equals_sgd_when_beta_zero(
    problem: &dyn Problem,
    alpha: AlphaSchedule,
    steps: usize,
    batch_size: Option<usize>,
    seed: u64,
) -> Result<bool, HarnessError> {
    Ok(acmo_sgd_deviation(problem, alpha, 0.0, steps, batch_size, seed)? <= 1e-15)
}
