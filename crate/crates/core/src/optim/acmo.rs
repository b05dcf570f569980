use super::{check_input, effective_grad, finish_step, MemoryReport, OptimError, Optimizer, StepInput, StepRecord};
use crate::linalg::ParamVector;
use crate::problems::BoxSet;
use crate::schedules::{beta_hat, Mode, ScheduleSet};

/// `m̂_{t−1}`, the coefficient carried to the next `Ψ` evaluation, and the
/// index of the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct AcmoState {
    pub mhat_prev: ParamVector,
    /// `β̂_{t−1}` in practical mode. In theory mode this is the applied
    /// `Ψ_{t−1}`, so that consecutive coefficients satisfy
    /// `Ψ_t ≤ √(t/(t−1))·Ψ_{t−1}`.
    pub beta_hat_prev: f64,
    pub t: usize,
}

/// Angle-calibrated moment method:
/// `m̂_t = g_t + Ψ(β̂_t, β̂_{t−1})·m̂_{t−1}`, `θ_{t+1} = Π_X(θ_t − α_t m̂_t)`.
#[derive(Debug, Clone)]
pub struct Acmo {
    state: AcmoState,
}

impl Acmo {
    pub fn new(dim: usize) -> Self {
        Self {
            state: AcmoState {
                mhat_prev: ParamVector::zeros(dim),
                beta_hat_prev: 0.0,
                t: 1,
            },
        }
    }

    pub fn state(&self) -> &AcmoState {
        &self.state
    }
}

impl Optimizer for Acmo {
    fn name(&self) -> &'static str {
        "acmo"
    }

    fn dim(&self) -> usize {
        self.state.mhat_prev.dim()
    }

    fn step(
        &mut self,
        input: &StepInput<'_>,
        sched: &ScheduleSet,
        feasible: Option<&BoxSet>,
    ) -> Result<(ParamVector, StepRecord), OptimError> {
        check_input(self.dim(), self.state.t, input)?;
        let t = input.t;
        let g = effective_grad(input, input.decay_mode);
        let (alpha, beta, delta) = (sched.alpha_at(t), sched.beta_at(t), sched.delta_at(t));
        let g_norm = g.norm();
        let m_norm = self.state.mhat_prev.norm();
        let bh = beta_hat(beta, g_norm, m_norm, delta)?;

        let mut mhat = g;
        let psi = match sched.psi_mode {
            Mode::Practical => {
                // β‖g‖·m̂_{t−1}/(‖m̂_{t−1}‖+δ) without forming the possibly
                // huge scalar β̂_t first
                if bh != 0.0 && m_norm != 0.0 {
                    let denom = m_norm + delta;
                    let scale = beta * g_norm;
                    for (m, p) in mhat.as_mut_slice().iter_mut().zip(self.state.mhat_prev.iter()) {
                        *m += scale * (p / denom);
                    }
                }
                bh
            }
            Mode::Theory => {
                let psi = sched.psi(bh, self.state.beta_hat_prev, t);
                if psi != 0.0 && m_norm != 0.0 {
                    mhat.axpy_in_place(psi, &self.state.mhat_prev)
                        .expect("state dimension checked");
                }
                psi
            }
        };
        if !mhat.is_finite() {
            return Err(OptimError::Diverged { t });
        }

        let mut next = input.theta.clone();
        next.axpy_in_place(-alpha, &mhat).expect("state dimension checked");
        let next = finish_step(next, input, input.decay_mode, alpha, feasible)?;

        let record = StepRecord {
            t,
            alpha,
            g_norm,
            beta_hat: bh,
            psi,
            mhat_norm: mhat.norm(),
        };
        self.state = AcmoState {
            mhat_prev: mhat,
            beta_hat_prev: psi,
            t: t + 1,
        };
        Ok((next, record))
    }

    fn moment(&self) -> Option<&ParamVector> {
        Some(&self.state.mhat_prev)
    }

    fn memory_report(&self) -> MemoryReport {
        // m̂_{t−1} plus β̂_{t−1} and t
        MemoryReport {
            buffers: 1,
            scalars: self.dim() + 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::DecayMode;
    use crate::schedules::AlphaSchedule;

    fn practical(alpha: f64, beta: f64) -> ScheduleSet {
        ScheduleSet::practical(AlphaSchedule::Constant { alpha0: alpha }, beta, 1e-8).unwrap()
    }

    fn v(x: &[f64]) -> ParamVector {
        x.to_vec().into()
    }

    #[test]
    fn first_step_is_sgd() {
        let mut opt = Acmo::new(3);
        let theta = v(&[1.0, 2.0, 3.0]);
        let g = v(&[0.5, -1.0, 2.0]);
        let (next, rec) = opt
            .step(&StepInput::new(&theta, &g, 1), &practical(0.1, 0.9), None)
            .unwrap();
        assert_eq!(next, v(&[1.0 - 0.05, 2.0 + 0.1, 3.0 - 0.2]));
        assert_eq!(opt.state().mhat_prev, g);
        assert_eq!(rec.mhat_norm, g.norm());
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt = Acmo::new(2);
        let s = practical(0.1, 0.9);
        let theta = v(&[1.0, 1.0]);
        let (theta2, _) = opt.step(&StepInput::new(&theta, &v(&[1.0, 0.0]), 1), &s, None).unwrap();
        let (theta3, rec) = opt
            .step(&StepInput::new(&theta2, &v(&[0.0, 0.0]), 2), &s, None)
            .unwrap();
        assert_eq!(rec.beta_hat, 0.0);
        assert_eq!(rec.mhat_norm, 0.0);
        assert_eq!(theta3, theta2);
    }

    #[test]
    fn two_step_hand_trace() {
        let mut opt = Acmo::new(2);
        let s = practical(0.1, 0.9);
        let theta1 = v(&[0.0, 0.0]);
        let (theta2, _) = opt
            .step(&StepInput::new(&theta1, &v(&[1.0, 0.0]), 1), &s, None)
            .unwrap();
        assert_eq!(theta2, v(&[-0.1, 0.0]));
        let (theta3, rec) = opt
            .step(&StepInput::new(&theta2, &v(&[0.0, 1.0]), 2), &s, None)
            .unwrap();
        // β̂₂ = 0.9·1/(1+1e-8); m̂₂ = (β̂₂, 1)
        let bh = 0.9 / (1.0 + 1e-8);
        assert_eq!(rec.beta_hat, bh);
        assert!((opt.state().mhat_prev[0] - 0.9).abs() < 1e-8);
        assert_eq!(opt.state().mhat_prev[1], 1.0);
        assert!((rec.mhat_norm - 1.81f64.sqrt()).abs() < 1e-8);
        assert!((theta3[0] + 0.19).abs() < 1e-9);
        assert!((theta3[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn huge_beta_hat_does_not_overflow() {
        let mut opt = Acmo::new(1);
        let s = ScheduleSet::practical(AlphaSchedule::Constant { alpha0: 1e-300 }, 0.9, 1e-300).unwrap();
        let theta = v(&[0.0]);
        let (theta2, _) = opt.step(&StepInput::new(&theta, &v(&[1e-300]), 1), &s, None).unwrap();
        // β̂₂ = 0.9·1e300/(1e-300 + 1e-300) overflows; the fused form does not
        let (_, rec) = opt.step(&StepInput::new(&theta2, &v(&[1e300]), 2), &s, None).unwrap();
        assert!(rec.beta_hat.is_infinite());
        assert!(opt.state().mhat_prev.is_finite());
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let mut opt = Acmo::new(1);
        let s = practical(1.0, 0.9);
        let theta = v(&[f64::MAX]);
        let err = opt
            .step(&StepInput::new(&theta, &v(&[-f64::MAX]), 1), &s, None)
            .unwrap_err();
        assert_eq!(err, OptimError::Diverged { t: 1 });
    }

    #[test]
    fn weight_decay_modes() {
        let s = practical(0.1, 0.0);
        let theta = v(&[2.0]);
        let g = v(&[1.0]);
        let coupled = StepInput::new(&theta, &g, 1).with_decay(0.5, DecayMode::CoupledL2);
        let (a, rec) = Acmo::new(1).step(&coupled, &s, None).unwrap();
        assert_eq!(rec.g_norm, 2.0);
        assert!((a[0] - (2.0 - 0.1 * 2.0)).abs() < 1e-15);
        let decoupled = StepInput::new(&theta, &g, 1).with_decay(0.5, DecayMode::Decoupled);
        let (b, rec) = Acmo::new(1).step(&decoupled, &s, None).unwrap();
        assert_eq!(rec.g_norm, 1.0);
        assert!((b[0] - (2.0 - 0.1 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn projection_and_step_order() {
        let mut opt = Acmo::new(2);
        let b = BoxSet::cube(2, 1.0).unwrap();
        let theta = v(&[0.9, 0.0]);
        let (next, _) = opt
            .step(
                &StepInput::new(&theta, &v(&[-10.0, 0.0]), 1),
                &practical(0.1, 0.9),
                Some(&b),
            )
            .unwrap();
        assert_eq!(next, v(&[1.0, 0.0]));
        let err = opt
            .step(&StepInput::new(&next, &v(&[0.0, 0.0]), 5), &practical(0.1, 0.9), None)
            .unwrap_err();
        assert_eq!(err, OptimError::OutOfOrder { expected: 2, found: 5 });
    }
}
