//! Time-indexed hyperparameters `α_t`, `β_t`, `δ_t` and the `Ψ` combiner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::SmoothnessMeta;

/// Largest moment coefficient admitted in theory mode.
pub const THEORY_BETA_MAX: f64 = 1.0 / 50.0;
/// Practical default for `δ_t`, mirroring the Adam-family `ε`.
pub const PRACTICAL_DELTA: f64 = 1e-8;
pub const PRACTICAL_BETA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("β̂ is undefined: δ_t = 0 and m̂_(t-1) = 0")]
    ZeroDenominator,
    #[error("iteration index must be at least 1")]
    ZeroIteration,
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("theory-mode precondition violated: {0}")]
    Theory(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Practical,
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSchedule {
    Constant {
        alpha0: f64,
    },
    /// `α₀/√t`.
    InvSqrt {
        alpha0: f64,
    },
    /// `α₀ · factor^⌊(epoch−1)/period⌋`, with `period` counted in epochs.
    StepDecay {
        alpha0: f64,
        factor: f64,
        period: usize,
    },
}

impl AlphaSchedule {
    pub fn alpha0(&self) -> f64 {
        match *self {
            Self::Constant { alpha0 } | Self::InvSqrt { alpha0 } | Self::StepDecay { alpha0, .. } => alpha0,
        }
    }

    fn validate(&self) -> Result<(), ScheduleError> {
        let a = self.alpha0();
        if !(a > 0.0 && a.is_finite()) {
            return Err(ScheduleError::Invalid(format!("alpha0 = {a} must be positive")));
        }
        if let Self::StepDecay { factor, period, .. } = *self {
            if !(factor > 0.0 && factor <= 1.0) {
                return Err(ScheduleError::Invalid(format!(
                    "decay factor {factor} must lie in (0, 1]"
                )));
            }
            if period == 0 {
                return Err(ScheduleError::Invalid("decay period must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Serializable schedule description. Missing values take mode-dependent
/// defaults when built against a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub mode: Mode,
    /// Defaults to `mode`.
    #[serde(default)]
    pub psi_mode: Option<Mode>,
    /// Required in practical mode. In theory mode an omitted schedule means
    /// `α₀/√t` with the largest admissible `α₀`.
    #[serde(default)]
    pub alpha: Option<AlphaSchedule>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// Upper estimate `L̂ ≥ L` used for theory-mode admission; defaults to
    /// the problem's `L`.
    #[serde(default)]
    pub lipschitz_hat: Option<f64>,
}

impl ScheduleSpec {
    pub fn practical(alpha: AlphaSchedule) -> Self {
        Self {
            mode: Mode::Practical,
            psi_mode: None,
            alpha: Some(alpha),
            beta: None,
            delta: None,
            lipschitz_hat: None,
        }
    }

    pub fn theory() -> Self {
        Self {
            mode: Mode::Theory,
            psi_mode: None,
            alpha: None,
            beta: None,
            delta: None,
            lipschitz_hat: None,
        }
    }

    pub fn build(&self, meta: &SmoothnessMeta, steps_per_epoch: usize) -> Result<ScheduleSet, ScheduleError> {
        match self.mode {
            Mode::Practical => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| ScheduleError::Invalid("practical mode needs an alpha schedule".into()))?;
                let mut s = ScheduleSet::practical(
                    alpha,
                    self.beta.unwrap_or(PRACTICAL_BETA),
                    self.delta.unwrap_or(PRACTICAL_DELTA),
                )?;
                if let Some(p) = self.psi_mode {
                    s.psi_mode = p;
                }
                s.steps_per_epoch = steps_per_epoch.max(1);
                Ok(s)
            }
            Mode::Theory => {
                let lhat = self.lipschitz_hat.unwrap_or(meta.lipschitz);
                let alpha0 = match self.alpha {
                    None => None,
                    Some(AlphaSchedule::InvSqrt { alpha0 }) => Some(alpha0),
                    Some(other) => {
                        return Err(ScheduleError::Theory(format!(
                            "theory mode needs an inv_sqrt step size, got {other:?}"
                        )))
                    }
                };
                if self.psi_mode == Some(Mode::Practical) {
                    return Err(ScheduleError::Theory("theory mode needs the theory Ψ".into()));
                }
                let mut s = ScheduleSet::theory(meta, lhat, alpha0, self.beta, self.delta)?;
                s.steps_per_epoch = steps_per_epoch.max(1);
                Ok(s)
            }
        }
    }
}

/// Validated hyperparameter functions of the iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub alpha: AlphaSchedule,
    pub beta: f64,
    pub delta: f64,
    pub psi_mode: Mode,
    pub mode: Mode,
    /// Iterations per epoch, used by `StepDecay`.
    pub steps_per_epoch: usize,
}

/// `3/(4L̂+1240)`, the theory-mode cap on `α₀`.
pub fn theory_alpha_cap(lipschitz_hat: f64) -> f64 {
    3.0 / (4.0 * lipschitz_hat + 1240.0)
}

impl ScheduleSet {
    pub fn practical(alpha: AlphaSchedule, beta: f64, delta: f64) -> Result<Self, ScheduleError> {
        alpha.validate()?;
        check_beta_delta(beta, delta)?;
        Ok(Self {
            alpha,
            beta,
            delta,
            psi_mode: Mode::Practical,
            mode: Mode::Practical,
            steps_per_epoch: 1,
        })
    }

    /// Theory-mode construction. Rejects `β > 1/50`, `δ < σ`, `L̂ < L` and
    /// `α₀ > min(3/(4L̂+1240), 1/L̂)`. Omitted values default to `β = 1/50`,
    /// `δ = 1.01σ` (at least `1e-8`) and the largest admissible `α₀`.
    pub fn theory(
        meta: &SmoothnessMeta,
        lipschitz_hat: f64,
        alpha0: Option<f64>,
        beta: Option<f64>,
        delta: Option<f64>,
    ) -> Result<Self, ScheduleError> {
        let sigma = meta
            .sigma
            .ok_or_else(|| ScheduleError::Theory("problem has no certified σ".into()))?;
        if !(lipschitz_hat.is_finite() && lipschitz_hat >= meta.lipschitz) {
            return Err(ScheduleError::Theory(format!(
                "L̂ = {lipschitz_hat} must be at least the problem's L = {}",
                meta.lipschitz
            )));
        }
        if lipschitz_hat <= 0.0 {
            return Err(ScheduleError::Theory("L̂ must be positive".into()));
        }
        let cap = theory_alpha_cap(lipschitz_hat).min(1.0 / lipschitz_hat);
        let alpha0 = alpha0.unwrap_or(cap);
        if alpha0 > cap {
            return Err(ScheduleError::Theory(format!(
                "α₀ = {alpha0} exceeds 3/(4L̂+1240) = {cap}"
            )));
        }
        let beta = beta.unwrap_or(THEORY_BETA_MAX);
        if beta > THEORY_BETA_MAX {
            return Err(ScheduleError::Theory(format!("β = {beta} exceeds 1/50")));
        }
        let delta = delta.unwrap_or((1.01 * sigma).max(PRACTICAL_DELTA));
        if delta < sigma {
            return Err(ScheduleError::Theory(format!("δ = {delta} is below σ = {sigma}")));
        }
        let alpha = AlphaSchedule::InvSqrt { alpha0 };
        alpha.validate()?;
        check_beta_delta(beta, delta)?;
        Ok(Self {
            alpha,
            beta,
            delta,
            psi_mode: Mode::Theory,
            mode: Mode::Theory,
            steps_per_epoch: 1,
        })
    }

    pub fn with_steps_per_epoch(mut self, steps: usize) -> Self {
        self.steps_per_epoch = steps.max(1);
        self
    }

    pub fn alpha_at(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        let t = t.max(1);
        match self.alpha {
            AlphaSchedule::Constant { alpha0 } => alpha0,
            AlphaSchedule::InvSqrt { alpha0 } => alpha0 / (t as f64).sqrt(),
            AlphaSchedule::StepDecay { alpha0, factor, period } => {
                let epoch = (t - 1) / self.steps_per_epoch;
                let k = epoch / period;
                alpha0 * factor.powi(k.min(i32::MAX as usize) as i32)
            }
        }
    }

    pub fn beta_at(&self, _t: usize) -> f64 {
        self.beta
    }

    pub fn delta_at(&self, _t: usize) -> f64 {
        self.delta
    }

    pub fn psi(&self, beta_hat_t: f64, beta_hat_prev: f64, t: usize) -> f64 {
        psi(self.psi_mode, beta_hat_t, beta_hat_prev, t)
    }
}

fn check_beta_delta(beta: f64, delta: f64) -> Result<(), ScheduleError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(ScheduleError::Invalid(format!("β = {beta} must lie in [0, 1]")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ScheduleError::Invalid(format!("δ = {delta} must be nonnegative")));
    }
    Ok(())
}

/// `β̂_t = β_t‖g_t‖/(‖m̂_{t−1}‖+δ_t)`.
pub fn beta_hat(beta: f64, g_norm: f64, mhat_prev_norm: f64, delta: f64) -> Result<f64, ScheduleError> {
    if g_norm == 0.0 {
        return Ok(0.0);
    }
    let denom = mhat_prev_norm + delta;
    if denom == 0.0 {
        return Err(ScheduleError::ZeroDenominator);
    }
    Ok(beta * g_norm / denom)
}

/// Practical: `β̂_t`. Theory: `min{β̂_t, √(t/(t−1))·β̂_{t−1}}`, and `β̂₁` at
/// `t = 1` where the factor is undefined.
pub fn psi(mode: Mode, beta_hat_t: f64, beta_hat_prev: f64, t: usize) -> f64 {
    match mode {
        Mode::Practical => beta_hat_t,
        Mode::Theory if t <= 1 => beta_hat_t,
        Mode::Theory => {
            let tf = t as f64;
            beta_hat_t.min((tf / (tf - 1.0)).sqrt() * beta_hat_prev)
        }
    }
}
