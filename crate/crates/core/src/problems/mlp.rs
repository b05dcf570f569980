use serde::{Deserialize, Serialize};

use super::{certify_max, BoxSet, Problem, ProblemError, SmoothnessMeta};
use crate::linalg::ParamVector;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    pub inputs: usize,
    pub hidden: usize,
    pub n_samples: usize,
    /// Parameters are confined to `[-w, w]`; the constants are certified on
    /// this box.
    #[serde(default = "default_half_width")]
    pub box_half_width: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Uniform draws used to certify `L`, `G` and `σ`.
    #[serde(default = "default_cert_points")]
    pub certification_points: usize,
}

fn default_half_width() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.05
}

fn default_cert_points() -> usize {
    2000
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            inputs: 3,
            hidden: 6,
            n_samples: 32,
            box_half_width: default_half_width(),
            noise: default_noise(),
            seed: 0,
            certification_points: default_cert_points(),
        }
    }
}

const SAFETY_MARGIN: f64 = 1.1;

/// One-hidden-layer tanh network with squared loss,
/// `f_i(θ) = ½ (w₂ᵀ tanh(W₁x_i + b₁) + b₂ − y_i)²`.
///
/// Parameter layout: `W₁` row-major (`hidden × inputs`), then `b₁`, `w₂`, `b₂`.
#[derive(Debug, Clone)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    feasible: BoxSet,
    init: ParamVector,
    meta: SmoothnessMeta,
}

impl Mlp {
    pub fn synthetic(spec: &MlpSpec) -> Result<Self, ProblemError> {
        if spec.inputs == 0 || spec.hidden == 0 || spec.n_samples == 0 {
            return Err(ProblemError::InvalidSpec(
                "inputs, hidden and n_samples must be positive".into(),
            ));
        }
        if spec.certification_points == 0 {
            return Err(ProblemError::InvalidSpec(
                "certification_points must be positive".into(),
            ));
        }
        let mut rng = Rng::new(spec.seed, 0);
        let dir: Vec<f64> = (0..spec.inputs).map(|_| rng.normal()).collect();
        let mut xs = Vec::with_capacity(spec.n_samples);
        let mut ys = Vec::with_capacity(spec.n_samples);
        for _ in 0..spec.n_samples {
            let x: Vec<f64> = (0..spec.inputs).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let proj: f64 = x.iter().zip(&dir).map(|(a, b)| a * b).sum();
            ys.push((1.5 * proj).sin() + spec.noise * rng.normal());
            xs.push(x);
        }
        let dim = spec.hidden * spec.inputs + 2 * spec.hidden + 1;
        let feasible = BoxSet::cube(dim, spec.box_half_width)?;
        let init = ParamVector::from(
            (0..dim)
                .map(|_| rng.uniform_in(-0.5, 0.5) * spec.box_half_width)
                .collect::<Vec<_>>(),
        );
        let mut p = Self {
            inputs: spec.inputs,
            hidden: spec.hidden,
            xs,
            ys,
            feasible,
            init,
            meta: SmoothnessMeta {
                lipschitz: 0.0,
                grad_bound: None,
                sigma: None,
                f_star: None,
                certified_by_sampling: true,
            },
        };
        let mut cert_rng = Rng::new(spec.seed, 1);
        p.meta = p.certify(spec.certification_points, &mut cert_rng);
        p.meta.validate()?;
        Ok(p)
    }

    /// Certifies the constants by uniform sampling over the box with a 10%
    /// margin. `L` is the largest per-sample Hessian spectral norm found by
    /// power iteration on finite-difference Hessian-vector products.
    fn certify(&self, points: usize, rng: &mut Rng) -> SmoothnessMeta {
        let n = self.n_samples();
        let region = self.feasible.clone();
        let grad_bound = certify_max(&region, points, SAFETY_MARGIN, rng, |theta| {
            (0..n)
                .map(|i| self.sample_gradient(i, theta).expect("dims").norm())
                .fold(0.0, f64::max)
        });
        let sigma = certify_max(&region, points, SAFETY_MARGIN, rng, |theta| {
            let full = self.full_gradient(theta).expect("dims");
            (0..n)
                .map(|i| {
                    self.sample_gradient(i, theta)
                        .expect("dims")
                        .sub(&full)
                        .expect("dims")
                        .norm()
                })
                .fold(0.0, f64::max)
        });
        let hessian_points = (points / 20).max(10);
        let mut start_rng = rng.substream(rng.stream_id() + 1);
        let lipschitz = certify_max(&region, hessian_points, SAFETY_MARGIN, rng, |theta| {
            (0..n)
                .map(|i| self.hessian_norm_estimate(i, theta, &mut start_rng))
                .fold(0.0, f64::max)
        });
        SmoothnessMeta {
            lipschitz,
            grad_bound: Some(grad_bound),
            sigma: Some(sigma.min(2.0 * grad_bound)),
            f_star: None,
            certified_by_sampling: true,
        }
    }

    fn hessian_norm_estimate(&self, i: usize, theta: &ParamVector, rng: &mut Rng) -> f64 {
        let d = self.dim();
        let mut v = ParamVector::from((0..d).map(|_| rng.normal()).collect::<Vec<_>>());
        let norm = v.norm();
        v.scale_in_place(1.0 / norm);
        let eps = 1e-5;
        let mut lambda = 0.0;
        for _ in 0..30 {
            let plus = theta.add(&v.scaled(eps)).expect("dims");
            let minus = theta.sub(&v.scaled(eps)).expect("dims");
            let mut hv = self.sample_gradient(i, &plus).expect("dims");
            hv.axpy_in_place(-1.0, &self.sample_gradient(i, &minus).expect("dims"))
                .expect("dims");
            hv.scale_in_place(1.0 / (2.0 * eps));
            lambda = hv.norm();
            if lambda == 0.0 {
                break;
            }
            v = hv.scaled(1.0 / lambda);
        }
        lambda
    }

    fn forward(&self, i: usize, theta: &[f64], hidden_out: &mut [f64]) -> f64 {
        let (k, h) = (self.inputs, self.hidden);
        let x = &self.xs[i];
        let b1 = &theta[h * k..h * k + h];
        let w2 = &theta[h * k + h..h * k + 2 * h];
        let b2 = theta[h * k + 2 * h];
        let mut out = b2;
        for j in 0..h {
            let row = &theta[j * k..(j + 1) * k];
            let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[j];
            let a = z.tanh();
            hidden_out[j] = a;
            out += w2[j] * a;
        }
        out
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn dim(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    fn n_samples(&self) -> usize {
        self.xs.len()
    }

    fn meta(&self) -> &SmoothnessMeta {
        &self.meta
    }

    fn feasible_box(&self) -> Option<&BoxSet> {
        Some(&self.feasible)
    }

    fn initial_point(&self) -> ParamVector {
        self.init.clone()
    }

    fn sample_loss(&self, i: usize, theta: &[f64]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        let r = self.forward(i, theta, &mut act) - self.ys[i];
        0.5 * r * r
    }

    fn accumulate_sample_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        let (k, h) = (self.inputs, self.hidden);
        let mut act = vec![0.0; h];
        let r = self.forward(i, theta, &mut act) - self.ys[i];
        let x = &self.xs[i];
        let w2 = &theta[h * k + h..h * k + 2 * h];
        for j in 0..h {
            // back through tanh: d tanh = 1 − tanh²
            let delta = r * w2[j] * (1.0 - act[j] * act[j]);
            for (c, xc) in x.iter().enumerate() {
                out[j * k + c] += scale * delta * xc;
            }
            out[h * k + j] += scale * delta;
            out[h * k + h + j] += scale * r * act[j];
        }
        out[h * k + 2 * h] += scale * r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::oracle::fd_full_gradient;

    fn small() -> Mlp {
        Mlp::synthetic(&MlpSpec {
            inputs: 2,
            hidden: 3,
            n_samples: 8,
            certification_points: 200,
            ..MlpSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn layout_dimension() {
        assert_eq!(small().dim(), 3 * 2 + 2 * 3 + 1);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let p = small();
        let mut rng = Rng::new(4, 0);
        for _ in 0..20 {
            let theta = p.feasible_box().unwrap().sample(&mut rng);
            let g = p.full_gradient(&theta).unwrap();
            let fd = fd_full_gradient(&p, &theta);
            let err = g.sub(&fd).unwrap().norm();
            assert!(err <= 1e-6 * g.norm().max(1e-3), "err {err} for |g| {}", g.norm());
        }
    }

    #[test]
    fn certified_constants_are_positive() {
        let m = *small().meta();
        assert!(m.certified_by_sampling);
        assert!(m.lipschitz > 0.0);
        assert!(m.grad_bound.unwrap() > 0.0);
        assert!(m.sigma.unwrap() > 0.0);
    }
}
