//! Finite-sum objectives `f(θ) = (1/n) Σ f_i(θ)` with analytic gradients,
//! mini-batch sampling and the smoothness metadata needed by theory-mode runs.

mod logistic;
mod mlp;
mod quadratic;
mod rosenbrock;
mod spec;

pub use logistic::{LogisticRegression, LogisticSpec};
pub use mlp::{Mlp, MlpSpec};
pub use quadratic::{Quadratic, StochasticQuadraticSpec};
pub use rosenbrock::{Rosenbrock, RosenbrockSpec};
pub use spec::{build_problem, ProblemSpec, PROBLEM_NAMES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ParamVector;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: problem has dimension {expected}, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty mini-batch")]
    EmptyBatch,
    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("batch size {batch} exceeds sample count {n}")]
    BatchTooLarge { batch: usize, n: usize },
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("invalid feasible box: {0}")]
    InvalidBox(String),
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
}

/// Analytic constants entering the convergence guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessMeta {
    /// Lipschitz constant of every per-sample gradient (hence of every
    /// mini-batch gradient and of the full gradient).
    pub lipschitz: f64,
    /// Bound on mini-batch gradient norms over the feasible set; `None` when
    /// no finite bound exists (e.g. an unconstrained quadratic).
    pub grad_bound: Option<f64>,
    /// Bound on `max_i ‖∇f_i(θ) − ∇f(θ)‖` over the feasible set.
    pub sigma: Option<f64>,
    pub f_star: Option<f64>,
    /// Whether the constants are closed-form or certified by sampling.
    pub certified_by_sampling: bool,
}

impl SmoothnessMeta {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lipschitz) {
            return Err(ProblemError::InvalidSpec(format!(
                "Lipschitz constant {} must be finite and nonnegative",
                self.lipschitz
            )));
        }
        for (name, v) in [("G", self.grad_bound), ("sigma", self.sigma)] {
            if let Some(v) = v {
                if !ok(v) {
                    return Err(ProblemError::InvalidSpec(format!(
                        "{name} = {v} must be finite and nonnegative"
                    )));
                }
            }
        }
        if let (Some(g), Some(s)) = (self.grad_bound, self.sigma) {
            if s > 2.0 * g * (1.0 + 1e-12) {
                return Err(ProblemError::InvalidSpec(format!(
                    "sigma = {s} exceeds 2G = {}",
                    2.0 * g
                )));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box `X = Π [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ProblemError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(ProblemError::InvalidBox(format!(
                "bound lengths {} and {} must match and be non-zero",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l.partial_cmp(h) != Some(std::cmp::Ordering::Less) {
                return Err(ProblemError::InvalidBox(format!(
                    "coordinate {i}: lower bound {l} is not below upper bound {h}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self, ProblemError> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Euclidean projection: coordinate-wise clamp.
    pub fn project(&self, theta: &ParamVector) -> ParamVector {
        let mut out = theta.clone();
        for (x, (l, h)) in out.as_mut_slice().iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
        out
    }

    pub fn contains(&self, theta: &ParamVector) -> bool {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    pub fn sample(&self, rng: &mut Rng) -> ParamVector {
        ParamVector::from(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(&l, &h)| rng.uniform_in(l, h))
                .collect::<Vec<_>>(),
        )
    }

    /// Largest Euclidean norm over the box (attained at a vertex).
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Calls `f` on every vertex. Only sensible for small dimensions.
    pub fn for_each_vertex(&self, mut f: impl FnMut(&ParamVector)) {
        let d = self.dim();
        let mut v = ParamVector::zeros(d);
        for mask in 0u64..(1u64 << d) {
            for i in 0..d {
                v[i] = if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] };
            }
            f(&v);
        }
    }
}

/// A finite-sum objective. Implementors supply per-sample values and
/// gradients; mini-batch and full quantities are derived from them.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn n_samples(&self) -> usize;
    fn meta(&self) -> &SmoothnessMeta;
    fn feasible_box(&self) -> Option<&BoxSet>;
    fn initial_point(&self) -> ParamVector;

    /// `f_i(θ)`; `theta` has length `dim()` and `i < n_samples()`.
    fn sample_loss(&self, i: usize, theta: &[f64]) -> f64;

    /// `out += scale · ∇f_i(θ)`.
    fn accumulate_sample_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]);

    /// A point where the full gradient vanishes, when known in closed form.
    fn stationary_point(&self) -> Option<ParamVector> {
        None
    }

    fn check_dim(&self, theta: &ParamVector) -> Result<(), ProblemError> {
        if theta.dim() == self.dim() {
            Ok(())
        } else {
            Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                found: theta.dim(),
            })
        }
    }

    fn check_batch(&self, batch: &MiniBatch) -> Result<(), ProblemError> {
        if batch.indices.is_empty() {
            return Err(ProblemError::EmptyBatch);
        }
        let n = self.n_samples();
        match batch.indices.iter().find(|&&i| i >= n) {
            Some(&index) => Err(ProblemError::IndexOutOfRange { index, n }),
            None => Ok(()),
        }
    }

    fn sample_gradient(&self, i: usize, theta: &ParamVector) -> Result<ParamVector, ProblemError> {
        self.check_dim(theta)?;
        if i >= self.n_samples() {
            return Err(ProblemError::IndexOutOfRange {
                index: i,
                n: self.n_samples(),
            });
        }
        let mut out = ParamVector::zeros(self.dim());
        self.accumulate_sample_gradient(i, theta.as_slice(), 1.0, out.as_mut_slice());
        Ok(out)
    }

    fn full_loss(&self, theta: &ParamVector) -> Result<f64, ProblemError> {
        self.check_dim(theta)?;
        let n = self.n_samples();
        let s: f64 = (0..n).map(|i| self.sample_loss(i, theta.as_slice())).sum();
        Ok(s / n as f64)
    }

    fn full_gradient(&self, theta: &ParamVector) -> Result<ParamVector, ProblemError> {
        self.check_dim(theta)?;
        let n = self.n_samples();
        let mut out = ParamVector::zeros(self.dim());
        for i in 0..n {
            self.accumulate_sample_gradient(i, theta.as_slice(), 1.0, out.as_mut_slice());
        }
        out.scale_in_place(1.0 / n as f64);
        Ok(out)
    }

    fn minibatch_loss(&self, theta: &ParamVector, batch: &MiniBatch) -> Result<f64, ProblemError> {
        self.check_dim(theta)?;
        self.check_batch(batch)?;
        let s: f64 = batch
            .indices
            .iter()
            .map(|&i| self.sample_loss(i, theta.as_slice()))
            .sum();
        Ok(s / batch.indices.len() as f64)
    }

    fn minibatch_gradient(&self, theta: &ParamVector, batch: &MiniBatch) -> Result<ParamVector, ProblemError> {
        self.check_dim(theta)?;
        self.check_batch(batch)?;
        let mut out = ParamVector::zeros(self.dim());
        for &i in &batch.indices {
            self.accumulate_sample_gradient(i, theta.as_slice(), 1.0, out.as_mut_slice());
        }
        out.scale_in_place(1.0 / batch.indices.len() as f64);
        Ok(out)
    }

    /// `Π_X(θ)`; identity when the problem is unconstrained.
    fn project(&self, theta: &ParamVector) -> ParamVector {
        match self.feasible_box() {
            Some(b) => b.project(theta),
            None => theta.clone(),
        }
    }
}

/// An index set `A_t` together with its position in the epoch schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
    pub epoch: usize,
    pub position: usize,
}

impl MiniBatch {
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            epoch: 0,
            position: 0,
        }
    }

    pub fn single(i: usize) -> Self {
        Self {
            indices: vec![i],
            epoch: 0,
            position: 0,
        }
    }
}

/// What to do with the trailing `n mod B` samples of each epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remainder {
    #[default]
    Drop,
    /// Complete the last batch with samples from the start of the epoch's
    /// permutation.
    Pad,
}

/// Random reshuffling: each epoch is a fresh permutation traversed in fixed
/// order, `B` samples at a time.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    remainder: Remainder,
    order: Vec<usize>,
    position: usize,
    epoch: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, remainder: Remainder, rng: Rng) -> Result<Self, ProblemError> {
        if batch_size == 0 {
            return Err(ProblemError::ZeroBatch);
        }
        if batch_size > n {
            return Err(ProblemError::BatchTooLarge { batch: batch_size, n });
        }
        let mut sampler = Self {
            n,
            batch_size,
            remainder,
            order: (0..n).collect(),
            position: 0,
            epoch: 0,
            rng,
        };
        sampler.rng.shuffle(&mut sampler.order);
        Ok(sampler)
    }

    pub fn batches_per_epoch(&self) -> usize {
        match self.remainder {
            Remainder::Drop => self.n / self.batch_size,
            Remainder::Pad => self.n.div_ceil(self.batch_size),
        }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_batch(&mut self) -> MiniBatch {
        if self.position == self.batches_per_epoch() {
            self.epoch += 1;
            self.position = 0;
            self.rng.shuffle(&mut self.order);
        }
        let start = self.position * self.batch_size;
        let end = (start + self.batch_size).min(self.n);
        let mut indices = self.order[start..end].to_vec();
        let missing = self.batch_size - indices.len();
        indices.extend_from_slice(&self.order[..missing]);
        let batch = MiniBatch {
            indices,
            epoch: self.epoch,
            position: self.position,
        };
        self.position += 1;
        batch
    }
}

/// Largest value of `f` over `count` uniform draws from `region`, inflated by
/// `margin` (e.g. `1.1` for a 10% safety margin).
pub(crate) fn certify_max(
    region: &BoxSet,
    count: usize,
    margin: f64,
    rng: &mut Rng,
    mut f: impl FnMut(&ParamVector) -> f64,
) -> f64 {
    let mut best = 0.0_f64;
    for _ in 0..count {
        let theta = region.sample(rng);
        best = best.max(f(&theta));
    }
    best * margin
}
