//! The stepping contract, the ACMo state machine and the baseline family.

mod acmo;
mod baselines;

pub use acmo::{Acmo, AcmoState};
pub use baselines::{Adabound, Adagrad, Adam, AdamFlavor, SgdMomentum};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ParamVector;
use crate::problems::BoxSet;
use crate::schedules::{ScheduleError, ScheduleSet};

pub const ADAM_EPS: f64 = 1e-8;

pub const OPTIMIZER_NAMES: &[&str] = &[
    "acmo",
    "sgd_momentum",
    "adagrad",
    "adam",
    "amsgrad",
    "adamw",
    "padam",
    "adabound",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("non-finite value produced at iteration {t}")]
    Diverged { t: usize },
    #[error("dimension mismatch: optimizer state has dimension {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("step called with t = {found}, state expects t = {expected}")]
    OutOfOrder { expected: usize, found: usize },
    #[error("{0}")]
    Schedule(#[from] ScheduleError),
    #[error("invalid optimizer hyperparameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Adds `λθ` to the gradient before any moment computation.
    #[default]
    CoupledL2,
    /// Subtracts `α_t λ θ_t` after the moment step.
    Decoupled,
}

#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub theta: &'a ParamVector,
    pub grad: &'a ParamVector,
    pub t: usize,
    pub weight_decay: f64,
    pub decay_mode: DecayMode,
}

impl<'a> StepInput<'a> {
    pub fn new(theta: &'a ParamVector, grad: &'a ParamVector, t: usize) -> Self {
        Self {
            theta,
            grad,
            t,
            weight_decay: 0.0,
            decay_mode: DecayMode::CoupledL2,
        }
    }

    pub fn with_decay(mut self, weight_decay: f64, mode: DecayMode) -> Self {
        self.weight_decay = weight_decay;
        self.decay_mode = mode;
        self
    }
}

/// Per-step scalars logged by every optimizer. Quantities an optimizer does
/// not have are `NaN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub alpha: f64,
    /// Norm of the gradient actually used (after coupled weight decay).
    pub g_norm: f64,
    pub beta_hat: f64,
    /// Coefficient applied to `m̂_{t−1}`.
    pub psi: f64,
    pub mhat_norm: f64,
}

/// Auxiliary state held by an optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    /// Number of `d`-dimensional buffers.
    pub buffers: usize,
    /// Total scalars across buffers and bookkeeping.
    pub scalars: usize,
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;

    /// Advances from `θ_t` to `θ_{t+1}`; `input.t` must equal the number of
    /// steps taken so far plus one.
    fn step(
        &mut self,
        input: &StepInput<'_>,
        sched: &ScheduleSet,
        feasible: Option<&BoxSet>,
    ) -> Result<(ParamVector, StepRecord), OptimError>;

    fn memory_report(&self) -> MemoryReport;

    /// The first-moment buffer after the latest step, if the method keeps one.
    fn moment(&self) -> Option<&ParamVector> {
        None
    }
}

/// Optimizer choice and its own hyperparameters. `α_t` always comes from the
/// schedule; ACMo also reads `β_t`, `δ_t` and `Ψ` from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Acmo,
    SgdMomentum {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adagrad {
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Amsgrad {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Adamw {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Padam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        /// Partial power `p ∈ (0, ½]`.
        #[serde(default = "default_partial")]
        partial: f64,
    },
    Adabound {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_final_lr")]
        final_lr: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_eps() -> f64 {
    ADAM_EPS
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_partial() -> f64 {
    0.125
}
fn default_final_lr() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    1e-3
}

impl OptimizerSpec {
    /// Default hyperparameters for a registry name. `"sgd"` is accepted as
    /// SGD-momentum with coefficient 0.
    pub fn from_name(name: &str) -> Option<Self> {
        let (b1, b2, eps) = (default_beta1(), default_beta2(), default_eps());
        Some(match name {
            "acmo" => Self::Acmo,
            "sgd" => Self::SgdMomentum { momentum: 0.0 },
            "sgd_momentum" => Self::SgdMomentum {
                momentum: default_momentum(),
            },
            "adagrad" => Self::Adagrad { eps },
            "adam" => Self::Adam {
                beta1: b1,
                beta2: b2,
                eps,
            },
            "amsgrad" => Self::Amsgrad {
                beta1: b1,
                beta2: b2,
                eps,
            },
            "adamw" => Self::Adamw {
                beta1: b1,
                beta2: b2,
                eps,
            },
            "padam" => Self::Padam {
                beta1: b1,
                beta2: b2,
                eps,
                partial: default_partial(),
            },
            "adabound" => Self::Adabound {
                beta1: b1,
                beta2: b2,
                eps,
                final_lr: default_final_lr(),
                gamma: default_gamma(),
            },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Acmo => "acmo",
            Self::SgdMomentum { .. } => "sgd_momentum",
            Self::Adagrad { .. } => "adagrad",
            Self::Adam { .. } => "adam",
            Self::Amsgrad { .. } => "amsgrad",
            Self::Adamw { .. } => "adamw",
            Self::Padam { .. } => "padam",
            Self::Adabound { .. } => "adabound",
        }
    }

    pub fn build(&self, dim: usize) -> Result<Box<dyn Optimizer>, OptimError> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(OptimError::Invalid(format!("{name} = {v} must lie in [0, 1)")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(OptimError::Invalid(format!("{name} = {v} must be positive")))
            }
        };
        if dim == 0 {
            return Err(OptimError::Invalid("dimension must be positive".into()));
        }
        Ok(match *self {
            Self::Acmo => Box::new(Acmo::new(dim)),
            Self::SgdMomentum { momentum } => {
                unit("momentum", momentum)?;
                Box::new(SgdMomentum::new(dim, momentum))
            }
            Self::Adagrad { eps } => {
                positive("eps", eps)?;
                Box::new(Adagrad::new(dim, eps))
            }
            Self::Adam { beta1, beta2, eps }
            | Self::Amsgrad { beta1, beta2, eps }
            | Self::Adamw { beta1, beta2, eps } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive("eps", eps)?;
                let flavor = match self {
                    Self::Adam { .. } => AdamFlavor::Adam,
                    Self::Amsgrad { .. } => AdamFlavor::Amsgrad,
                    _ => AdamFlavor::AdamW,
                };
                Box::new(Adam::new(dim, flavor, beta1, beta2, eps))
            }
            Self::Padam {
                beta1,
                beta2,
                eps,
                partial,
            } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive("eps", eps)?;
                if !(partial > 0.0 && partial <= 0.5) {
                    return Err(OptimError::Invalid(format!(
                        "partial power {partial} must lie in (0, 1/2]"
                    )));
                }
                Box::new(Adam::new(dim, AdamFlavor::Padam { partial }, beta1, beta2, eps))
            }
            Self::Adabound {
                beta1,
                beta2,
                eps,
                final_lr,
                gamma,
            } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive("eps", eps)?;
                positive("final_lr", final_lr)?;
                positive("gamma", gamma)?;
                Box::new(Adabound::new(dim, beta1, beta2, eps, final_lr, gamma))
            }
        })
    }
}

/// Checks dimensions and the step counter shared by every optimizer.
pub(crate) fn check_input(dim: usize, expected_t: usize, input: &StepInput<'_>) -> Result<(), OptimError> {
    for v in [input.theta, input.grad] {
        if v.dim() != dim {
            return Err(OptimError::DimensionMismatch {
                expected: dim,
                found: v.dim(),
            });
        }
    }
    if input.t != expected_t {
        return Err(OptimError::OutOfOrder {
            expected: expected_t,
            found: input.t,
        });
    }
    Ok(())
}

/// The gradient with coupled L2 decay folded in.
pub(crate) fn effective_grad(input: &StepInput<'_>, mode: DecayMode) -> ParamVector {
    let mut g = input.grad.clone();
    if mode == DecayMode::CoupledL2 && input.weight_decay != 0.0 {
        for (gi, ti) in g.as_mut_slice().iter_mut().zip(input.theta.iter()) {
            *gi += input.weight_decay * ti;
        }
    }
    g
}

/// Applies decoupled decay (when selected), projects and checks finiteness.
pub(crate) fn finish_step(
    mut next: ParamVector,
    input: &StepInput<'_>,
    mode: DecayMode,
    alpha: f64,
    feasible: Option<&BoxSet>,
) -> Result<ParamVector, OptimError> {
    if mode == DecayMode::Decoupled && input.weight_decay != 0.0 {
        let c = alpha * input.weight_decay;
        for (x, t) in next.as_mut_slice().iter_mut().zip(input.theta.iter()) {
            *x -= c * t;
        }
    }
    if !next.is_finite() {
        return Err(OptimError::Diverged { t: input.t });
    }
    Ok(match feasible {
        Some(b) => b.project(&next),
        None => next,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve_and_round_trip() {
        for name in OPTIMIZER_NAMES {
            let spec = OptimizerSpec::from_name(name).unwrap();
            assert_eq!(spec.name(), *name);
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<OptimizerSpec>(&json).unwrap(), spec);
            assert_eq!(spec.build(3).unwrap().name(), *name);
        }
        assert!(OptimizerSpec::from_name("lion").is_none());
    }

    #[test]
    fn memory_reports() {
        let d = 1000;
        let report = |n: &str| OptimizerSpec::from_name(n).unwrap().build(d).unwrap().memory_report();
        assert_eq!(report("acmo").buffers, 1);
        assert!(report("acmo").scalars >= d && report("acmo").scalars <= d + 4);
        assert_eq!(report("adam").buffers, 2);
        assert_eq!(report("adamw").buffers, 2);
        assert_eq!(report("amsgrad").buffers, 3);
        assert_eq!(report("padam").buffers, 3);
        assert_eq!(report("sgd_momentum").buffers, 1);
        assert_eq!(report("adagrad").buffers, 1);
        assert_eq!(report("adabound").buffers, 2);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let bad = [
            OptimizerSpec::SgdMomentum { momentum: 1.0 },
            OptimizerSpec::Adagrad { eps: 0.0 },
            OptimizerSpec::Padam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                partial: 0.75,
            },
        ];
        for spec in bad {
            assert!(spec.build(2).is_err(), "{spec:?}");
        }
        assert!(OptimizerSpec::Acmo.build(0).is_err());
    }
}
