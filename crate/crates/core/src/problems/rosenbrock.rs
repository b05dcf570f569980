use serde::{Deserialize, Serialize};

use super::{BoxSet, Problem, ProblemError, SmoothnessMeta};
use crate::linalg::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RosenbrockSpec {
    /// `[x_lo, x_hi, y_lo, y_hi]`; `None` leaves the problem unconstrained
    /// (and without a finite `L` or `G`).
    #[serde(default = "default_bounds")]
    pub bounds: Option<[f64; 4]>,
    #[serde(default = "default_init")]
    pub init: [f64; 2],
}

fn default_bounds() -> Option<[f64; 4]> {
    Some([-2.0, 2.0, -1.0, 3.0])
}

fn default_init() -> [f64; 2] {
    [-1.2, 1.0]
}

impl Default for RosenbrockSpec {
    fn default() -> Self {
        Self {
            bounds: default_bounds(),
            init: default_init(),
        }
    }
}

/// Deterministic two-dimensional Rosenbrock function
/// `f(x, y) = (1 − x)² + 100 (y − x²)²` as a single-sample finite sum.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    feasible: Option<BoxSet>,
    init: ParamVector,
    meta: SmoothnessMeta,
}

impl Rosenbrock {
    pub fn new(spec: &RosenbrockSpec) -> Result<Self, ProblemError> {
        let feasible = spec
            .bounds
            .map(|[xl, xh, yl, yh]| BoxSet::new(vec![xl, yl], vec![xh, yh]))
            .transpose()?;
        let mut init = ParamVector::from(spec.init.to_vec());
        if let Some(b) = &feasible {
            init = b.project(&init);
        }
        let meta = match &feasible {
            Some(b) => Self::box_meta(b),
            // no global smoothness constant exists; callers must not run
            // theory mode on the unconstrained variant
            None => SmoothnessMeta {
                lipschitz: 0.0,
                grad_bound: None,
                sigma: Some(0.0),
                f_star: Some(0.0),
                certified_by_sampling: false,
            },
        };
        let p = Self { feasible, init, meta };
        if p.feasible.is_some() {
            p.meta.validate()?;
        }
        Ok(p)
    }

    /// Gershgorin bound on the Hessian and a triangle-inequality bound on the
    /// gradient over the box.
    fn box_meta(b: &BoxSet) -> SmoothnessMeta {
        let (xl, xh) = (b.lo()[0], b.hi()[0]);
        let (yl, yh) = (b.lo()[1], b.hi()[1]);
        let x_abs = xl.abs().max(xh.abs());
        let y_abs = yl.abs().max(yh.abs());
        let x_sq_max = x_abs * x_abs;
        let x_sq_min = if xl <= 0.0 && 0.0 <= xh {
            0.0
        } else {
            (xl * xl).min(xh * xh)
        };
        // H = [[2 − 400y + 1200x², −400x], [−400x, 200]]
        let h11 = (2.0 - 400.0 * yl + 1200.0 * x_sq_max)
            .abs()
            .max((2.0 - 400.0 * yh + 1200.0 * x_sq_min).abs());
        let h12 = 400.0 * x_abs;
        let lipschitz = (h11 + h12).max(h12 + 200.0);
        let g1 = 2.0 * (1.0 + x_abs) + 400.0 * x_abs * (y_abs + x_sq_max);
        let g2 = 200.0 * (y_abs + x_sq_max);
        SmoothnessMeta {
            lipschitz,
            grad_bound: Some((g1 * g1 + g2 * g2).sqrt()),
            sigma: Some(0.0),
            f_star: Some(0.0),
            certified_by_sampling: false,
        }
    }
}

impl Problem for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        2
    }

    fn n_samples(&self) -> usize {
        1
    }

    fn meta(&self) -> &SmoothnessMeta {
        &self.meta
    }

    fn feasible_box(&self) -> Option<&BoxSet> {
        self.feasible.as_ref()
    }

    fn initial_point(&self) -> ParamVector {
        self.init.clone()
    }

    fn sample_loss(&self, _i: usize, theta: &[f64]) -> f64 {
        let (x, y) = (theta[0], theta[1]);
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    }

    fn accumulate_sample_gradient(&self, _i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        let (x, y) = (theta[0], theta[1]);
        let r = y - x * x;
        out[0] += scale * (-2.0 * (1.0 - x) - 400.0 * x * r);
        out[1] += scale * (200.0 * r);
    }

    fn stationary_point(&self) -> Option<ParamVector> {
        Some(vec![1.0, 1.0].into())
    }
}
