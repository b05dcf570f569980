//! Numerical checks of the moment bounds, descent guarantees, the
//! constructed-sequence identity and the convergence bound, plus the Adagrad
//! auxiliary-problem decomposition and rate fitting.

mod adagrad;
mod monitors;
mod rate;
mod sweep;

pub use adagrad::{adagrad_minimizers, adagrad_objectives, adagrad_projection_decomposition, AdagradTerms};
pub use monitors::{
    auxiliary_residual, check_auxiliary_optimality, check_constructed_sequence, check_corollary_a1, check_lemma_a1,
    check_lemma_a3, check_rate, check_sufficient_descent, check_theorem_bound, theorem_constants, CHECK_NAMES,
    COROLLARY_A1_BOUND, RATE_SLOPE_MAX,
};
pub use rate::{fit_rate, RateFit};
pub use sweep::{appendix_sweep, default_beta_grid, default_sweep_indices};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ParamVector;
use crate::problems::MiniBatch;
use crate::schedules::Mode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("check `{check}` needs an ACMo trajectory, got `{found}`")]
    NotAcmo { check: &'static str, found: String },
    #[error("check `{0}` needs a theory-mode trajectory")]
    PracticalMode(&'static str),
    #[error("check `{0}` needs a trajectory with stored vectors")]
    MissingVectors(&'static str),
    #[error("step size α_{t} = {alpha} exceeds 1/L = {inv_l}")]
    StepTooLarge { t: usize, alpha: f64, inv_l: f64 },
    #[error("problem metadata lacks {0}")]
    MissingMeta(&'static str),
    #[error("rate fit needs at least 10 points, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit needs positive t and y, got ({t}, {y})")]
    NonPositive { t: f64, y: f64 },
    #[error("decomposition needs d ≤ 8 and 1 ≤ t ≤ 32, got d = {d}, t = {t}")]
    DecompositionSize { d: usize, t: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Problem(#[from] crate::problems::ProblemError),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("check `{check}` assumes no projection, but the box was active at step {t}")]
    ProjectionActive { check: &'static str, t: usize },
}

/// One logged iteration. `loss` and `grad_norm` refer to the full objective
/// at `θ_t`; `minibatch_loss` and `g_norm` to the batch drawn at step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub loss: f64,
    pub minibatch_loss: f64,
    pub grad_norm: f64,
    pub g_norm: f64,
    pub beta_hat: f64,
    pub mhat_norm: f64,
    pub alpha: f64,
    pub wall_ns: u64,
}

impl TrajectoryRow {
    fn numbers(&self) -> [f64; 7] {
        [
            self.loss,
            self.minibatch_loss,
            self.grad_norm,
            self.g_norm,
            self.beta_hat,
            self.mhat_norm,
            self.alpha,
        ]
    }

    /// Bitwise equality of every numeric column except `wall_ns` (so `NaN`
    /// entries compare equal to themselves).
    pub fn same_numbers(&self, other: &Self) -> bool {
        self.iter == other.iter
            && self
                .numbers()
                .iter()
                .zip(other.numbers().iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Vectors retained for the checks that re-evaluate iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredStep {
    /// `θ_t`.
    pub theta: ParamVector,
    /// `g_t` as used by the optimizer.
    pub grad: ParamVector,
    /// The optimizer's moment after the step (`m̂_t` for ACMo).
    pub moment: Option<ParamVector>,
    /// Coefficient applied to `m̂_{t−1}`.
    pub psi: f64,
    pub batch: MiniBatch,
}

/// The iterate log of one trajectory: rows for `t = 1..T−1`, the final
/// iterate `θ_T`, and optionally the full vectors of every step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub optimizer: String,
    pub mode: Mode,
    pub rows: Vec<TrajectoryRow>,
    pub final_theta: ParamVector,
    pub output_index: Option<usize>,
    pub steps: Option<Vec<StoredStep>>,
}

impl TrajectoryRecord {
    /// `T`, the number of iterates.
    pub fn iterations(&self) -> usize {
        self.rows.len() + 1
    }

    /// `θ_t` for `1 ≤ t ≤ T`, when vectors were stored.
    pub fn theta(&self, t: usize) -> Option<&ParamVector> {
        let steps = self.steps.as_ref()?;
        if t == steps.len() + 1 {
            Some(&self.final_theta)
        } else {
            steps.get(t.checked_sub(1)?).map(|s| &s.theta)
        }
    }

    /// First step `t` whose stored `θ_{t+1}` differs from the unprojected
    /// `θ_t − α_t m̂_t`. `None` for other optimizers or without stored vectors.
    pub fn first_projected_step(&self) -> Option<usize> {
        if self.optimizer != "acmo" {
            return None;
        }
        let steps = self.steps.as_ref()?;
        (1..=steps.len()).find(|&t| {
            let s = &steps[t - 1];
            let Some(m) = s.moment.as_ref() else {
                return false;
            };
            let pre = crate::linalg::axpy(-self.rows[t - 1].alpha, m, &s.theta).expect("stored dimensions agree");
            Some(&pre) != self.theta(t + 1)
        })
    }

    pub fn same_numbers(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_numbers(b))
            && self.final_theta == other.final_theta
            && self.output_index == other.output_index
    }

    fn require_acmo(&self, check: &'static str) -> Result<(), DiagnosticsError> {
        if self.optimizer == "acmo" {
            Ok(())
        } else {
            Err(DiagnosticsError::NotAcmo {
                check,
                found: self.optimizer.clone(),
            })
        }
    }

    fn require_steps(&self, check: &'static str) -> Result<&[StoredStep], DiagnosticsError> {
        self.steps.as_deref().ok_or(DiagnosticsError::MissingVectors(check))
    }
}

/// Outcome of checking an inequality along a trajectory. Slacks are scaled so
/// that a violation is `slack < −tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    #[serde(skip)]
    pub slacks: Vec<f64>,
    pub worst_slack: f64,
    pub violated: bool,
    pub n_steps: usize,
    #[serde(skip)]
    pub tolerance: f64,
}

impl BoundReport {
    pub fn from_slacks(name: impl Into<String>, slacks: Vec<f64>, tolerance: f64) -> Self {
        // NaN slacks count as violations
        let worst = slacks
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, s| {
                Some(match acc {
                    None => s,
                    Some(a) if s.is_nan() || a.is_nan() => f64::NAN,
                    Some(a) => a.min(s),
                })
            })
            .unwrap_or(0.0);
        Self {
            name: name.into(),
            n_steps: slacks.len(),
            slacks,
            worst_slack: worst,
            violated: worst.is_nan() || worst < -tolerance,
            tolerance,
        }
    }

    /// Steps (1-based positions in `slacks`) whose slack is below `−tolerance`.
    pub fn violations(&self) -> Vec<usize> {
        self.slacks
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_nan() || **s < -self.tolerance)
            .map(|(i, _)| i + 1)
            .collect()
    }
}
