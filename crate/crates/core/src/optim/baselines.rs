//! Standard formulations of the comparison optimizers. The Adam family uses
//! bias correction.

use super::{
    check_input, effective_grad, finish_step, DecayMode, MemoryReport, OptimError, Optimizer, StepInput, StepRecord,
};
use crate::linalg::ParamVector;
use crate::problems::BoxSet;
use crate::schedules::ScheduleSet;

fn record(t: usize, alpha: f64, g: &ParamVector, direction_norm: f64) -> StepRecord {
    StepRecord {
        t,
        alpha,
        g_norm: g.norm(),
        beta_hat: f64::NAN,
        psi: f64::NAN,
        mhat_norm: direction_norm,
    }
}

/// Heavy-ball momentum `m_t = μ m_{t−1} + g_t`, `θ_{t+1} = θ_t − α_t m_t`.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    momentum: f64,
    buf: ParamVector,
    t: usize,
}

impl SgdMomentum {
    pub fn new(dim: usize, momentum: f64) -> Self {
        Self {
            momentum,
            buf: ParamVector::zeros(dim),
            t: 1,
        }
    }
}

impl Optimizer for SgdMomentum {
    fn name(&self) -> &'static str {
        "sgd_momentum"
    }

    fn dim(&self) -> usize {
        self.buf.dim()
    }

    fn step(
        &mut self,
        input: &StepInput<'_>,
        sched: &ScheduleSet,
        feasible: Option<&BoxSet>,
    ) -> Result<(ParamVector, StepRecord), OptimError> {
        check_input(self.dim(), self.t, input)?;
        let alpha = sched.alpha_at(input.t);
        let g = effective_grad(input, input.decay_mode);
        let mut next = input.theta.clone();
        for ((m, gi), x) in self
            .buf
            .as_mut_slice()
            .iter_mut()
            .zip(g.iter())
            .zip(next.as_mut_slice())
        {
            *m = if self.momentum == 0.0 {
                *gi
            } else {
                self.momentum * *m + gi
            };
            *x -= alpha * *m;
        }
        let next = finish_step(next, input, input.decay_mode, alpha, feasible)?;
        self.t += 1;
        Ok((next, record(input.t, alpha, &g, self.buf.norm())))
    }

    fn moment(&self) -> Option<&ParamVector> {
        Some(&self.buf)
    }

    fn memory_report(&self) -> MemoryReport {
        MemoryReport {
            buffers: 1,
            scalars: self.dim() + 2,
        }
    }
}

/// Diagonal Adagrad `v_t = Σ g_τ²`, `θ_{t+1} = θ_t − α_t g_t/(√v_t + ε)`.
#[derive(Debug, Clone)]
pub struct Adagrad {
    eps: f64,
    sum_sq: ParamVector,
    t: usize,
}

impl Adagrad {
    pub fn new(dim: usize, eps: f64) -> Self {
        Self {
            eps,
            sum_sq: ParamVector::zeros(dim),
            t: 1,
        }
    }
}

impl Optimizer for Adagrad {
    fn name(&self) -> &'static str {
        "adagrad"
    }

    fn dim(&self) -> usize {
        self.sum_sq.dim()
    }

    fn step(
        &mut self,
        input: &StepInput<'_>,
        sched: &ScheduleSet,
        feasible: Option<&BoxSet>,
    ) -> Result<(ParamVector, StepRecord), OptimError> {
        check_input(self.dim(), self.t, input)?;
        let alpha = sched.alpha_at(input.t);
        let g = effective_grad(input, input.decay_mode);
        let mut next = input.theta.clone();
        for ((v, gi), x) in self
            .sum_sq
            .as_mut_slice()
            .iter_mut()
            .zip(g.iter())
            .zip(next.as_mut_slice())
        {
            *v += gi * gi;
            *x -= alpha * gi / (v.sqrt() + self.eps);
        }
        let next = finish_step(next, input, input.decay_mode, alpha, feasible)?;
        self.t += 1;
        Ok((next, record(input.t, alpha, &g, f64::NAN)))
    }

    fn memory_report(&self) -> MemoryReport {
        MemoryReport {
            buffers: 1,
            scalars: self.dim() + 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdamFlavor {
    Adam,
    /// Running maximum of the raw second moment, bias-corrected afterwards.
    Amsgrad,
    /// Adam with decoupled weight decay regardless of the requested mode.
    AdamW,
    /// AMSGrad maximum with the denominator raised to `2p` instead of 1.
    Padam {
        partial: f64,
    },
}

/// Adam, AMSGrad, AdamW and PAdam.
#[derive(Debug, Clone)]
pub struct Adam {
    flavor: AdamFlavor,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: ParamVector,
    v: ParamVector,
    v_max: Option<ParamVector>,
    t: usize,
}

impl Adam {
    pub fn new(dim: usize, flavor: AdamFlavor, beta1: f64, beta2: f64, eps: f64) -> Self {
        let v_max = match flavor {
            AdamFlavor::Amsgrad | AdamFlavor::Padam { .. } => Some(ParamVector::zeros(dim)),
            AdamFlavor::Adam | AdamFlavor::AdamW => None,
        };
        Self {
            flavor,
            beta1,
            beta2,
            eps,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            v_max,
            t: 1,
        }
    }

    /// The running maximum `v̂_t` (AMSGrad and PAdam only).
    pub fn v_max(&self) -> Option<&ParamVector> {
        self.v_max.as_ref()
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        match self.flavor {
            AdamFlavor::Adam => "adam",
            AdamFlavor::Amsgrad => "amsgrad",
            AdamFlavor::AdamW => "adamw",
            AdamFlavor::Padam { .. } => "padam",
        }
    }

    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn step(
        &mut self,
        input: &StepInput<'_>,
        sched: &ScheduleSet,
        feasible: Option<&BoxSet>,
    ) -> Result<(ParamVector, StepRecord), OptimError> {
        check_input(self.dim(), self.t, input)?;
        let t = input.t;
        let alpha = sched.alpha_at(t);
        let mode = match self.flavor {
            AdamFlavor::AdamW => DecayMode::Decoupled,
            _ => input.decay_mode,
        };
        let g = effective_grad(input, mode);
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let mut next = input.theta.clone();
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for i in 0..self.dim() {
            let gi = g[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * gi;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * gi * gi;
            let second = match &mut self.v_max {
                Some(vm) => {
                    vm[i] = vm[i].max(self.v[i]);
                    vm[i]
                }
                None => self.v[i],
            };
            let denom = (second / bc2).sqrt() + eps;
            let denom = match self.flavor {
                AdamFlavor::Padam { partial } => denom.powf(2.0 * partial),
                _ => denom,
            };
            next[i] -= alpha * (self.m[i] / bc1) / denom;
        }
        let next = finish_step(next, input, mode, alpha, feasible)?;
        self.t += 1;
        Ok((next, record(t, alpha, &g, self.m.norm())))
    }

    fn moment(&self) -> Option<&ParamVector> {
        Some(&self.m)
    }

    fn memory_report(&self) -> MemoryReport {
        let buffers = 2 + usize::from(self.v_max.is_some());
        MemoryReport {
            buffers,
            scalars: buffers * self.dim() + 1,
        }
    }
}

/// Adam with per-coordinate step sizes clipped to
/// `[η_l(t), η_u(t)] = η*·[1 − 1/(γt+1), 1 + 1/(γt)]`, where the final rate
/// `η*` follows the schedule's decay relative to `α₀`.
#[derive(Debug, Clone)]
pub struct Adabound {
    beta1: f64,
    beta2: f64,
    eps: f64,
    final_lr: f64,
    gamma: f64,
    m: ParamVector,
    v: ParamVector,
    t: usize,
}

impl Adabound {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64, final_lr: f64, gamma: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            final_lr,
            gamma,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            t: 1,
        }
    }

    pub fn bounds(&self, t: usize, alpha: f64, alpha0: f64) -> (f64, f64) {
        let eta = self.final_lr * alpha / alpha0;
        let gt = self.gamma * t as f64;
        (eta * (1.0 - 1.0 / (gt + 1.0)), eta * (1.0 + 1.0 / gt))
    }
}

impl Optimizer for Adabound {
    fn name(&self) -> &'static str {
        "adabound"
    }

    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn step(
        &mut self,
        input: &StepInput<'_>,
        sched: &ScheduleSet,
        feasible: Option<&BoxSet>,
    ) -> Result<(ParamVector, StepRecord), OptimError> {
        check_input(self.dim(), self.t, input)?;
        let t = input.t;
        let alpha = sched.alpha_at(t);
        let g = effective_grad(input, input.decay_mode);
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let step_size = alpha * bc2.sqrt() / bc1;
        let (lo, hi) = self.bounds(t, alpha, sched.alpha.alpha0());
        let mut next = input.theta.clone();
        for i in 0..self.dim() {
            let gi = g[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * gi;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * gi * gi;
            let eta = (step_size / (self.v[i].sqrt() + self.eps)).clamp(lo, hi);
            next[i] -= eta * self.m[i];
        }
        let next = finish_step(next, input, input.decay_mode, alpha, feasible)?;
        self.t += 1;
        Ok((next, record(t, alpha, &g, self.m.norm())))
    }

    fn moment(&self) -> Option<&ParamVector> {
        Some(&self.m)
    }

    fn memory_report(&self) -> MemoryReport {
        MemoryReport {
            buffers: 2,
            scalars: 2 * self.dim() + 1,
        }
    }
}
