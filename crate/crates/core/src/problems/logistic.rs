use serde::{Deserialize, Serialize};

use super::{BoxSet, Problem, ProblemError, SmoothnessMeta};
use crate::linalg::ParamVector;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticSpec {
    pub dim: usize,
    pub n_samples: usize,
    /// Ridge coefficient added to every sample loss.
    pub l2: f64,
    /// Probability of flipping each generated label.
    pub label_noise: f64,
    pub box_half_width: Option<f64>,
    pub seed: u64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            n_samples: 256,
            l2: 1e-3,
            label_noise: 0.1,
            box_half_width: None,
            seed: 0,
        }
    }
}

/// Two-class logistic regression,
/// `f_i(θ) = log(1 + exp(−y_i x_iᵀθ)) + (λ/2)‖θ‖²` with `y_i ∈ {−1, +1}`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    l2: f64,
    feasible: Option<BoxSet>,
    meta: SmoothnessMeta,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    pub fn from_data(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        l2: f64,
        feasible: Option<BoxSet>,
    ) -> Result<Self, ProblemError> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(ProblemError::InvalidSpec(format!(
                "{} feature rows for {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|x| x.len() != d) {
            return Err(ProblemError::InvalidSpec(
                "feature rows must share a positive length".into(),
            ));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(ProblemError::InvalidSpec("labels must be ±1".into()));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(ProblemError::InvalidSpec(format!("l2 = {l2} must be nonnegative")));
        }
        if let Some(b) = &feasible {
            if b.dim() != d {
                return Err(ProblemError::DimensionMismatch {
                    expected: d,
                    found: b.dim(),
                });
            }
        }
        let mut p = Self {
            features,
            labels,
            l2,
            feasible,
            meta: SmoothnessMeta {
                lipschitz: 0.0,
                grad_bound: None,
                sigma: None,
                f_star: None,
                certified_by_sampling: false,
            },
        };
        p.meta = p.compute_meta();
        p.meta.validate()?;
        Ok(p)
    }

    /// Gaussian features, labels from a random separating direction with a
    /// fraction of them flipped.
    pub fn synthetic(spec: &LogisticSpec) -> Result<Self, ProblemError> {
        if spec.dim == 0 || spec.n_samples == 0 {
            return Err(ProblemError::InvalidSpec("dim and n_samples must be positive".into()));
        }
        if !(0.0..=1.0).contains(&spec.label_noise) {
            return Err(ProblemError::InvalidSpec("label_noise must lie in [0, 1]".into()));
        }
        let mut rng = Rng::new(spec.seed, 0);
        let truth: Vec<f64> = (0..spec.dim).map(|_| rng.normal()).collect();
        let mut features = Vec::with_capacity(spec.n_samples);
        let mut labels = Vec::with_capacity(spec.n_samples);
        for _ in 0..spec.n_samples {
            let x: Vec<f64> = (0..spec.dim).map(|_| rng.normal()).collect();
            let margin: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
            let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
            if rng.uniform() < spec.label_noise {
                y = -y;
            }
            features.push(x);
            labels.push(y);
        }
        let feasible = spec.box_half_width.map(|h| BoxSet::cube(spec.dim, h)).transpose()?;
        Self::from_data(features, labels, spec.l2, feasible)
    }

    fn compute_meta(&self) -> SmoothnessMeta {
        let n = self.features.len() as f64;
        let norms: Vec<f64> = self
            .features
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let max_norm = norms.iter().copied().fold(0.0, f64::max);
        let total: f64 = norms.iter().sum();
        // Hessian of the loss part is σ(1−σ) x xᵀ ⪯ ¼ x xᵀ.
        let lipschitz = 0.25 * max_norm * max_norm + self.l2;
        // ‖∇ softplus(−y xᵀθ)‖ ≤ ‖x‖, and the ridge term cancels in
        // ∇f_i − ∇f = (1 − 1/n)∇h_i − (1/n)Σ_{j≠i}∇h_j.
        let sigma = norms
            .iter()
            .map(|&ni| (1.0 - 1.0 / n) * ni + (total - ni) / n)
            .fold(0.0, f64::max);
        let grad_bound = if self.l2 == 0.0 {
            Some(max_norm)
        } else {
            self.feasible.as_ref().map(|b| max_norm + self.l2 * b.max_norm())
        };
        SmoothnessMeta {
            lipschitz,
            grad_bound,
            sigma: Some(sigma),
            f_star: None,
            certified_by_sampling: false,
        }
    }
}

impl Problem for LogisticRegression {
    fn name(&self) -> &str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.features[0].len()
    }

    fn n_samples(&self) -> usize {
        self.features.len()
    }

    fn meta(&self) -> &SmoothnessMeta {
        &self.meta
    }

    fn feasible_box(&self) -> Option<&BoxSet> {
        self.feasible.as_ref()
    }

    fn initial_point(&self) -> ParamVector {
        ParamVector::zeros(self.dim())
    }

    fn sample_loss(&self, i: usize, theta: &[f64]) -> f64 {
        let x = &self.features[i];
        let margin: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let ridge = 0.5 * self.l2 * theta.iter().map(|v| v * v).sum::<f64>();
        softplus(-self.labels[i] * margin) + ridge
    }

    fn accumulate_sample_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        let x = &self.features[i];
        let y = self.labels[i];
        let margin: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = -y * sigmoid(-y * margin);
        for ((o, xi), t) in out.iter_mut().zip(x).zip(theta) {
            *o += scale * (w * xi + self.l2 * t);
        }
    }
}
