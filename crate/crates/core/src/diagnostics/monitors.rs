use super::{fit_rate, BoundReport, DiagnosticsError, TrajectoryRecord};
use crate::linalg::{axpy, ParamVector};
use crate::problems::{Problem, SmoothnessMeta};
use crate::schedules::{Mode, ScheduleSet};

pub const CHECK_NAMES: &[&str] = &[
    "lemma_a1",
    "corollary_a1",
    "lemma_a3",
    "constructed_sequence",
    "theorem_bound",
    "rate",
    "sufficient_descent",
    "auxiliary_optimality",
    "appendix_sweep",
];

pub const COROLLARY_A1_BOUND: f64 = 1.0 / 12.0;
/// Largest accepted log-log slope of the min-so-far squared gradient norm.
pub const RATE_SLOPE_MAX: f64 = -0.35;

const LEMMA_A1_TOL: f64 = 1e-10;
const LEMMA_A3_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-9;
const DESCENT_TOL: f64 = 1e-10;
const AUXILIARY_TOL: f64 = 1e-10;

fn require_theory(traj: &TrajectoryRecord, check: &'static str) -> Result<(), DiagnosticsError> {
    if traj.mode == Mode::Theory {
        Ok(())
    } else {
        Err(DiagnosticsError::PracticalMode(check))
    }
}

/// `(1−β_t)‖g_t‖ ≤ ‖m̂_t‖ ≤ (1+β_t)‖g_t‖`, slack scaled by `1 + ‖g_t‖`.
pub fn check_lemma_a1(traj: &TrajectoryRecord, sched: &ScheduleSet) -> Result<BoundReport, DiagnosticsError> {
    traj.require_acmo("lemma_a1")?;
    let slacks = traj
        .rows
        .iter()
        .map(|r| {
            let beta = sched.beta_at(r.iter);
            let lower = r.mhat_norm - (1.0 - beta) * r.g_norm;
            let upper = (1.0 + beta) * r.g_norm - r.mhat_norm;
            lower.min(upper) / (1.0 + r.g_norm)
        })
        .collect();
    Ok(BoundReport::from_slacks("lemma_a1", slacks, LEMMA_A1_TOL))
}

/// `β̂_t ≤ 1/12` for `t ≥ 2`. At `t = 1` the coefficient multiplies
/// `m̂₀ = 0` and is unbounded as `δ → 0`, so it is not checked.
pub fn check_corollary_a1(traj: &TrajectoryRecord) -> Result<BoundReport, DiagnosticsError> {
    traj.require_acmo("corollary_a1")?;
    require_theory(traj, "corollary_a1")?;
    let slacks = traj
        .rows
        .iter()
        .filter(|r| r.iter >= 2)
        .map(|r| COROLLARY_A1_BOUND - r.beta_hat)
        .collect();
    Ok(BoundReport::from_slacks("corollary_a1", slacks, 0.0))
}

/// `‖g_t‖/(‖m̂_{t−1}‖+δ_t) ≤ 2 + Lα_{t−1} + 1/(1−β_{t−1})` for `t ≥ 2`.
pub fn check_lemma_a3(
    traj: &TrajectoryRecord,
    meta: &SmoothnessMeta,
    sched: &ScheduleSet,
) -> Result<BoundReport, DiagnosticsError> {
    traj.require_acmo("lemma_a3")?;
    require_theory(traj, "lemma_a3")?;
    let slacks = traj
        .rows
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let ratio = cur.g_norm / (prev.mhat_norm + sched.delta_at(cur.iter));
            let bound = 2.0 + meta.lipschitz * prev.alpha + 1.0 / (1.0 - sched.beta_at(prev.iter));
            bound - ratio
        })
        .collect();
    Ok(BoundReport::from_slacks("lemma_a3", slacks, LEMMA_A3_TOL))
}

fn k_coef(i: usize, b: f64) -> f64 {
    let i = i as f64;
    (6.0 / (i + 1.0).sqrt() + 1.0) * b / ((i / (i - 1.0)).sqrt() - b)
}

fn c_coef(i: usize, b: f64) -> f64 {
    ((1.0 / i as f64).sqrt() + 1.0) / (1.0 - b)
}

fn inf_norm_diff(a: &ParamVector, b: &ParamVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The constructed-sequence recurrence and its `i = 2` base case, with the
/// applied `Ψ_i` in place of `β̂_i`. Each residual is
/// `‖LHS − RHS‖_∞ / (1 + ‖θ′‖_∞)`. The identity assumes
/// `θ_{i+1} − θ_i = −α_i m̂_i`, i.e. no active projection.
pub fn check_constructed_sequence(traj: &TrajectoryRecord) -> Result<BoundReport, DiagnosticsError> {
    traj.require_acmo("constructed_sequence")?;
    let steps = traj.require_steps("constructed_sequence")?;
    let n = steps.len();
    let theta = |t: usize| traj.theta(t).expect("stored iterate");
    let psi = |t: usize| steps[t - 1].psi;
    let alpha = |t: usize| traj.rows[t - 1].alpha;
    let grad = |t: usize| &steps[t - 1].grad;
    let moment = |t: usize| {
        steps[t - 1]
            .moment
            .as_ref()
            .ok_or(DiagnosticsError::MissingVectors("constructed_sequence"))
    };
    let diff = |a: &ParamVector, b: &ParamVector| a.sub(b).expect("equal dimensions");
    let shifted = |i: usize| {
        let d = diff(theta(i), theta(i - 1));
        let mut out = theta(i).clone();
        out.axpy_in_place(k_coef(i, psi(i)), &d).expect("equal dimensions");
        out
    };

    let mut slacks = Vec::new();
    if n >= 2 {
        let step = diff(theta(2), theta(1));
        let c_prime = (2f64.sqrt() + 1.0) / (1.0 - psi(1));
        let lhs_hi = shifted(2);
        let lhs = diff(&lhs_hi, theta(1));
        let mut rhs = grad(1).scaled(-alpha(1) * c_prime);
        rhs.axpy_in_place(k_coef(2, psi(2)) - c_prime + 1.0, &step)
            .expect("equal dimensions");
        let scale = 1.0 + lhs_hi.max_abs().max(theta(1).max_abs());
        slacks.push(-inf_norm_diff(&lhs, &rhs) / scale);
    }
    for i in 2..n {
        let lhs = shifted(i + 1);
        let (b, c, k) = (psi(i), c_coef(i, psi(i)), k_coef(i, psi(i)));
        let mut rhs = shifted(i);
        rhs.axpy_in_place(-alpha(i) * c, grad(i)).expect("equal dimensions");
        rhs.axpy_in_place(-(alpha(i) * c * b - alpha(i - 1) * k), moment(i - 1)?)
            .expect("equal dimensions");
        rhs.axpy_in_place(k_coef(i + 1, psi(i + 1)) - (c - 1.0), &diff(theta(i + 1), theta(i)))
            .expect("equal dimensions");
        slacks.push(-inf_norm_diff(&lhs, &rhs) / (1.0 + lhs.max_abs()));
    }
    Ok(BoundReport::from_slacks("constructed_sequence", slacks, IDENTITY_TOL))
}

/// `(C₀′, C₁′)` with `C₀′ = (L/2+235)α₀σ² + 70G² + 1` and
/// `C₁′ = (L/2+3)α₀σ² + 60G² + 1`.
pub fn theorem_constants(meta: &SmoothnessMeta, alpha0: f64) -> Result<(f64, f64), DiagnosticsError> {
    let g = meta
        .grad_bound
        .ok_or(DiagnosticsError::MissingMeta("a gradient bound G"))?;
    let sigma = meta.sigma.ok_or(DiagnosticsError::MissingMeta("σ"))?;
    let l = meta.lipschitz;
    let c0 = (l / 2.0 + 235.0) * alpha0 * sigma * sigma + (70.0 * g * g + 1.0);
    let c1 = (l / 2.0 + 3.0) * alpha0 * sigma * sigma + (60.0 * g * g + 1.0);
    Ok((c0, c1))
}

/// `S_t = Σ α_i‖∇f(θ_i)‖² / Σ α_i ≤ (C₀′ + C₁′ ln t)/√t` for `t ≥ 2`; slack
/// relative to the bound.
pub fn check_theorem_bound(
    traj: &TrajectoryRecord,
    meta: &SmoothnessMeta,
    alpha0: f64,
) -> Result<BoundReport, DiagnosticsError> {
    require_theory(traj, "theorem_bound")?;
    let (c0, c1) = theorem_constants(meta, alpha0)?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut slacks = Vec::with_capacity(traj.rows.len());
    for r in &traj.rows {
        num += r.alpha * r.grad_norm * r.grad_norm;
        den += r.alpha;
        if r.iter >= 2 {
            let t = r.iter as f64;
            let bound = (c0 + c1 * t.ln()) / t.sqrt();
            slacks.push((bound - num / den) / bound);
        }
    }
    Ok(BoundReport::from_slacks("theorem_bound", slacks, 0.0))
}

/// Fitted log-log slope of `min_{i≤t} ‖∇f(θ_i)‖²` over `t ∈ [lo, hi]` on 60
/// log-spaced points; slack is `RATE_SLOPE_MAX − slope`.
pub fn check_rate(traj: &TrajectoryRecord, lo: usize, hi: usize) -> Result<BoundReport, DiagnosticsError> {
    let hi = hi.min(traj.rows.len());
    let lo = lo.max(1);
    if hi <= lo {
        return Err(DiagnosticsError::TooFewPoints(hi.saturating_sub(lo)));
    }
    let mut best = f64::INFINITY;
    let min_so_far: Vec<f64> = traj
        .rows
        .iter()
        .map(|r| {
            best = best.min(r.grad_norm * r.grad_norm);
            best
        })
        .collect();
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut ts: Vec<usize> = (0..60)
        .map(|k| (llo + (lhi - llo) * k as f64 / 59.0).exp().round() as usize)
        .map(|t| t.clamp(lo, hi))
        .collect();
    ts.dedup();
    let series: Vec<(f64, f64)> = ts.iter().map(|&t| (t as f64, min_so_far[t - 1])).collect();
    let fit = fit_rate(&series)?;
    Ok(BoundReport::from_slacks("rate", vec![RATE_SLOPE_MAX - fit.slope], 0.0))
}

/// Re-evaluates `f_{A_t}(θ_{t+1}) − f_{A_t}(θ_t)` on every step; requires
/// `α_t ≤ 1/L`. Slack is the decrease scaled by `1 + |f_{A_t}(θ_t)|`.
pub fn check_sufficient_descent(
    problem: &dyn Problem,
    traj: &TrajectoryRecord,
) -> Result<BoundReport, DiagnosticsError> {
    let steps = traj.require_steps("sufficient_descent")?;
    let inv_l = 1.0 / problem.meta().lipschitz;
    if let Some(r) = traj.rows.iter().find(|r| r.alpha > inv_l) {
        return Err(DiagnosticsError::StepTooLarge {
            t: r.iter,
            alpha: r.alpha,
            inv_l,
        });
    }
    let mut slacks = Vec::with_capacity(steps.len());
    for (k, s) in steps.iter().enumerate() {
        let next = traj.theta(k + 2).expect("stored iterate");
        let before = problem.minibatch_loss(&s.theta, &s.batch)?;
        let after = problem.minibatch_loss(next, &s.batch)?;
        slacks.push((before - after) / (1.0 + before.abs()));
    }
    Ok(BoundReport::from_slacks("sufficient_descent", slacks, DESCENT_TOL))
}

/// `‖(θ_{t+1} − θ_t)/α_t + g_t + Ψ_t m̂_{t−1}‖`, the gradient of the ACMo
/// iteration auxiliary objective at the (pre-projection) new iterate.
pub fn auxiliary_residual(
    theta_t: &ParamVector,
    theta_next: &ParamVector,
    grad: &ParamVector,
    mhat_prev: &ParamVector,
    psi: f64,
    alpha: f64,
) -> f64 {
    let use_moment = psi != 0.0 && !mhat_prev.is_zero();
    let mut sq = 0.0;
    for i in 0..theta_t.dim() {
        let mut r = (theta_next[i] - theta_t[i]) / alpha + grad[i];
        if use_moment {
            r += psi * mhat_prev[i];
        }
        sq += r * r;
    }
    sq.sqrt()
}

/// [`auxiliary_residual`] on every step of an ACMo trajectory, evaluated at
/// the pre-projection iterate `θ_t − α_t m̂_t`. On unconstrained problems
/// that is the stored `θ_{t+1}` itself.
pub fn check_auxiliary_optimality(traj: &TrajectoryRecord) -> Result<BoundReport, DiagnosticsError> {
    traj.require_acmo("auxiliary_optimality")?;
    let steps = traj.require_steps("auxiliary_optimality")?;
    let moment = |k: usize| {
        steps[k]
            .moment
            .as_ref()
            .ok_or(DiagnosticsError::MissingVectors("auxiliary_optimality"))
    };
    let zero = ParamVector::zeros(traj.final_theta.dim());
    let mut slacks = Vec::with_capacity(steps.len());
    for (k, s) in steps.iter().enumerate() {
        let prev = if k == 0 { &zero } else { moment(k - 1)? };
        let alpha = traj.rows[k].alpha;
        let pre = axpy(-alpha, moment(k)?, &s.theta).expect("dimensions match");
        slacks.push(-auxiliary_residual(&s.theta, &pre, &s.grad, prev, s.psi, alpha));
    }
    Ok(BoundReport::from_slacks("auxiliary_optimality", slacks, AUXILIARY_TOL))
}
