use super::{BoxSet, Problem, ProblemError, SmoothnessMeta};
use crate::linalg::{ParamVector, SymMatrix};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Vertex enumeration is exact but exponential; above this we fall back to
/// norm bounds.
const MAX_VERTEX_DIM: usize = 16;

/// Generator parameters for [`Quadratic::stochastic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticQuadraticSpec {
    pub dim: usize,
    pub n_samples: usize,
    /// Smallest and largest eigenvalue of the shared curvature matrix.
    pub curvature: [f64; 2],
    pub spread: f64,
    pub box_half_width: Option<f64>,
    pub init: f64,
    pub seed: u64,
}

impl Default for StochasticQuadraticSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            n_samples: 64,
            curvature: [25.0, 50.0],
            spread: 0.5,
            box_half_width: Some(2.0),
            init: 1.0,
            seed: 0,
        }
    }
}

/// Finite-sum quadratic `f_i(θ) = ½ θᵀA_iθ − b_iᵀθ` with PSD `A_i`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    /// Either one shared matrix or one per sample.
    matrices: Vec<SymMatrix>,
    offsets: Vec<ParamVector>,
    feasible: Option<BoxSet>,
    init: ParamVector,
    minimizer: Option<ParamVector>,
    meta: SmoothnessMeta,
}

impl Quadratic {
    /// Per-sample `(A_i, b_i)` pairs.
    pub fn new(terms: Vec<(SymMatrix, ParamVector)>, feasible: Option<BoxSet>) -> Result<Self, ProblemError> {
        if terms.is_empty() {
            return Err(ProblemError::InvalidSpec("quadratic needs at least one term".into()));
        }
        let d = terms[0].1.dim();
        for (a, b) in &terms {
            if a.dim() != d || b.dim() != d {
                return Err(ProblemError::DimensionMismatch {
                    expected: d,
                    found: if a.dim() != d { a.dim() } else { b.dim() },
                });
            }
        }
        let (matrices, offsets): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        let shared = matrices.iter().all(|m| *m == matrices[0]);
        let matrices = if shared { vec![matrices[0].clone()] } else { matrices };
        Self::assemble(matrices, offsets, feasible, ParamVector::zeros(d), None)
    }

    /// `f(θ) = ½‖θ‖²` with a single sample.
    pub fn isotropic(dim: usize) -> Self {
        let mut q = Self::new(vec![(SymMatrix::identity(dim), ParamVector::zeros(dim))], None)
            .expect("valid isotropic quadratic");
        q.minimizer = Some(ParamVector::zeros(dim));
        q.meta.f_star = Some(0.0);
        q.init = ParamVector::filled(dim, 1.0);
        q
    }

    /// Stochastic quadratic `f_i(θ) = ½ (θ − c_i)ᵀ A (θ − c_i)` up to a
    /// constant, with a shared randomly rotated `A` whose spectrum is spaced
    /// evenly over the curvature range and centres `c_i = spread · N(0, I)`.
    pub fn stochastic(spec: &StochasticQuadraticSpec) -> Result<Self, ProblemError> {
        let StochasticQuadraticSpec {
            dim,
            n_samples,
            curvature: [curvature_lo, curvature_hi],
            spread,
            box_half_width,
            init,
            seed,
        } = *spec;
        if dim == 0 || n_samples == 0 {
            return Err(ProblemError::InvalidSpec("dim and n_samples must be positive".into()));
        }
        if !(0.0 <= curvature_lo && curvature_lo <= curvature_hi) {
            return Err(ProblemError::InvalidSpec(format!(
                "curvature range [{curvature_lo}, {curvature_hi}] must be nonnegative and ordered"
            )));
        }
        let feasible = box_half_width.map(|h| BoxSet::cube(dim, h)).transpose()?;
        let rng = &mut Rng::new(seed, 0);
        let q = random_orthogonal(dim, rng);
        let spectrum: Vec<f64> = (0..dim)
            .map(|k| {
                if dim == 1 {
                    curvature_hi
                } else {
                    curvature_lo + (curvature_hi - curvature_lo) * k as f64 / (dim - 1) as f64
                }
            })
            .collect();
        let mut a = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = (0..dim).map(|k| q[i][k] * spectrum[k] * q[j][k]).sum();
                a.set(i, j, v);
            }
        }
        let centers: Vec<ParamVector> = (0..n_samples)
            .map(|_| ParamVector::from((0..dim).map(|_| spread * rng.normal()).collect::<Vec<_>>()))
            .collect();
        let offsets = centers
            .iter()
            .map(|c| a.mul_vec(c).expect("dimensions agree"))
            .collect();
        let mut mean = ParamVector::zeros(dim);
        for c in &centers {
            mean.axpy_in_place(1.0 / n_samples as f64, c).expect("dimensions agree");
        }
        let mut init_point = ParamVector::filled(dim, init);
        if let Some(b) = &feasible {
            init_point = b.project(&init_point);
        }
        let minimizer = if curvature_lo > 0.0 { Some(mean) } else { None };
        Self::assemble(vec![a], offsets, feasible, init_point, minimizer)
    }

    fn assemble(
        matrices: Vec<SymMatrix>,
        offsets: Vec<ParamVector>,
        feasible: Option<BoxSet>,
        init: ParamVector,
        minimizer: Option<ParamVector>,
    ) -> Result<Self, ProblemError> {
        let mut q = Self {
            matrices,
            offsets,
            feasible,
            init,
            minimizer,
            meta: SmoothnessMeta {
                lipschitz: 0.0,
                grad_bound: None,
                sigma: None,
                f_star: None,
                certified_by_sampling: false,
            },
        };
        q.meta = q.compute_meta();
        q.meta.validate()?;
        Ok(q)
    }

    fn matrix(&self, i: usize) -> &SymMatrix {
        if self.matrices.len() == 1 {
            &self.matrices[0]
        } else {
            &self.matrices[i]
        }
    }

    fn sample_grad_vec(&self, i: usize, theta: &ParamVector) -> ParamVector {
        let mut g = self.matrix(i).mul_vec(theta).expect("dimensions agree");
        g.axpy_in_place(-1.0, &self.offsets[i]).expect("dimensions agree");
        g
    }

    fn compute_meta(&self) -> SmoothnessMeta {
        let n = self.offsets.len();
        let d = self.init.dim();
        let lipschitz = self
            .matrices
            .iter()
            .map(|m| m.max_eigenvalue().max(0.0))
            .fold(0.0, f64::max);
        let mut mean_offset = ParamVector::zeros(d);
        for b in &self.offsets {
            mean_offset.axpy_in_place(1.0 / n as f64, b).expect("dimensions agree");
        }
        let shared = self.matrices.len() == 1;

        // ∇f_i − ∇f = (A_i − Ā)θ − (b_i − b̄): constant when A is shared,
        // otherwise convex in θ and maximised at a vertex of the box.
        let sigma = if shared {
            Some(
                self.offsets
                    .iter()
                    .map(|b| b.sub(&mean_offset).expect("dimensions agree").norm())
                    .fold(0.0, f64::max),
            )
        } else {
            self.feasible.as_ref().and_then(|bx| {
                (d <= MAX_VERTEX_DIM).then(|| {
                    let mut worst = 0.0_f64;
                    bx.for_each_vertex(|v| {
                        let full = self.full_gradient(v).expect("dimensions agree");
                        for i in 0..n {
                            let diff = self.sample_grad_vec(i, v).sub(&full).expect("dims");
                            worst = worst.max(diff.norm());
                        }
                    });
                    worst
                })
            })
        };

        // ‖A_iθ − b_i‖ is convex, so its maximum over the box sits at a vertex
        // and bounds every mini-batch average.
        let grad_bound = self.feasible.as_ref().map(|bx| {
            if d <= MAX_VERTEX_DIM {
                let mut worst = 0.0_f64;
                bx.for_each_vertex(|v| {
                    for i in 0..n {
                        worst = worst.max(self.sample_grad_vec(i, v).norm());
                    }
                });
                worst
            } else {
                let r = bx.max_norm();
                (0..n)
                    .map(|i| {
                        let spec = self.matrix(i).eigen().values;
                        let op = spec.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                        op * r + self.offsets[i].norm()
                    })
                    .fold(0.0, f64::max)
            }
        });

        let f_star = self
            .minimizer
            .as_ref()
            .filter(|m| self.feasible.as_ref().is_none_or(|b| b.contains(m)))
            .map(|m| self.full_loss(m).expect("dimensions agree"));

        SmoothnessMeta {
            lipschitz,
            grad_bound,
            sigma,
            f_star,
            certified_by_sampling: false,
        }
    }

    pub fn with_init(mut self, init: ParamVector) -> Result<Self, ProblemError> {
        self.check_dim(&init)?;
        self.init = init;
        Ok(self)
    }
}

/// Gram-Schmidt on a Gaussian matrix; rows of the result are orthonormal.
fn random_orthogonal(dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        for r in &rows {
            let p: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    // transpose so that columns are the basis vectors
    (0..dim).map(|i| (0..dim).map(|j| rows[j][i]).collect()).collect()
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.init.dim()
    }

    fn n_samples(&self) -> usize {
        self.offsets.len()
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

    fn sample_loss(&self, i: usize, theta: &[f64]) -> f64 {
        let a = self.matrix(i);
        let b = &self.offsets[i];
        let d = theta.len();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for r in 0..d {
            let row: f64 = (0..d).map(|c| a.get(r, c) * theta[c]).sum();
            quad += theta[r] * row;
            lin += b[r] * theta[r];
        }
        0.5 * quad - lin
    }

    fn accumulate_sample_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        let a = self.matrix(i);
        let b = &self.offsets[i];
        let d = theta.len();
        for r in 0..d {
            let row: f64 = (0..d).map(|c| a.get(r, c) * theta[c]).sum();
            out[r] += scale * (row - b[r]);
        }
    }

    fn stationary_point(&self) -> Option<ParamVector> {
        self.minimizer.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{oracle::fd_full_gradient, MiniBatch};

    #[test]
    fn isotropic_gradient_is_identity() {
        let p = Quadratic::isotropic(2);
        let g = p.full_gradient(&vec![2.0, -1.0].into()).unwrap();
        assert_eq!(g, vec![2.0, -1.0].into());
    }

    #[test]
    fn two_sample_diagonal_batch_gradient() {
        let p = Quadratic::new(
            vec![
                (SymMatrix::diagonal(&[1.0, 2.0]), ParamVector::zeros(2)),
                (SymMatrix::diagonal(&[3.0, 1.0]), ParamVector::zeros(2)),
            ],
            None,
        )
        .unwrap();
        let theta: ParamVector = vec![1.0, 1.0].into();
        assert_eq!(
            p.minibatch_gradient(&theta, &MiniBatch::single(0)).unwrap(),
            vec![1.0, 2.0].into()
        );
        assert_eq!(p.full_gradient(&theta).unwrap(), vec![2.0, 1.5].into());
        assert_eq!(p.meta().lipschitz, 3.0);
        // unconstrained with differing A_i: no finite variance bound
        assert_eq!(p.meta().sigma, None);
        assert_eq!(p.meta().grad_bound, None);
    }

    #[test]
    fn stochastic_instance_metadata() {
        let p = Quadratic::stochastic(&StochasticQuadraticSpec {
            dim: 4,
            n_samples: 16,
            curvature: [1.0, 5.0],
            spread: 0.3,
            box_half_width: Some(2.0),
            init: 1.0,
            seed: 3,
        })
        .unwrap();
        let m = p.meta();
        assert!((m.lipschitz - 5.0).abs() < 1e-10);
        assert!(m.sigma.unwrap() > 0.0);
        assert!(m.grad_bound.unwrap() >= m.sigma.unwrap() / 2.0);
        let star = p.stationary_point().unwrap();
        assert!(p.full_gradient(&star).unwrap().norm() < 1e-10);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11, 0);
        let p = Quadratic::stochastic(&StochasticQuadraticSpec {
            dim: 5,
            n_samples: 8,
            curvature: [0.5, 3.0],
            spread: 1.0,
            box_half_width: None,
            init: 0.0,
            seed: 11,
        })
        .unwrap();
        for _ in 0..10 {
            let theta = ParamVector::from((0..5).map(|_| rng.uniform_in(-2.0, 2.0)).collect::<Vec<_>>());
            let a = p.full_gradient(&theta).unwrap();
            let fd = fd_full_gradient(&p, &theta);
            assert!(a.sub(&fd).unwrap().norm() <= 1e-6 * a.norm().max(1.0));
        }
    }

    #[test]
    fn per_sample_matrices_vertex_sigma() {
        let bx = BoxSet::cube(2, 1.0).unwrap();
        let p = Quadratic::new(
            vec![
                (SymMatrix::diagonal(&[1.0, 2.0]), ParamVector::zeros(2)),
                (SymMatrix::diagonal(&[3.0, 1.0]), ParamVector::zeros(2)),
            ],
            Some(bx),
        )
        .unwrap();
        // ∇f_0 − ∇f = diag(-1, 0.5)θ, maximised at a vertex: √(1 + 0.25)
        assert!((p.meta().sigma.unwrap() - 1.25_f64.sqrt()).abs() < 1e-14);
        // ‖diag(3,1)θ‖ at (±1, ±1) = √10
        assert!((p.meta().grad_bound.unwrap() - 10f64.sqrt()).abs() < 1e-14);
    }
}
