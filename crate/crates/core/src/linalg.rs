//! Dense vector arithmetic and the small symmetric-matrix routines used by
//! the diagnostics.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite scalar argument: {0}")]
    NonFinite(f64),
    #[error("empty vector")]
    Empty,
}

fn check_dims(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

/// Flat dense parameter vector. Carries parameters, gradients and moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.is_empty() {
            return Err(LinalgError::Empty);
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "ParamVector dimension must be at least 1");
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(dim >= 1, "ParamVector dimension must be at least 1");
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        l2_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|v| a * v).collect())
    }

    pub fn scale_in_place(&mut self, a: f64) {
        self.0.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * x`.
    pub fn axpy_in_place(&mut self, a: f64, x: &ParamVector) -> Result<(), LinalgError> {
        check_dims(self.dim(), x.dim())?;
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += a * xi;
        }
        Ok(())
    }

    pub fn add(&self, other: &ParamVector) -> Result<Self, LinalgError> {
        axpy(1.0, other, self)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<Self, LinalgError> {
        axpy(-1.0, other, self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ParamVector, f: impl Fn(f64, f64) -> f64) -> Result<Self, LinalgError> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect()))
    }
}

impl From<Vec<f64>> for ParamVector {
    /// Panics on an empty vector; use [`ParamVector::new`] for fallible construction.
    fn from(data: Vec<f64>) -> Self {
        Self::new(data).expect("ParamVector must be non-empty")
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Returns `a * x + y`.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite(a));
    }
    check_dims(y.dim(), x.dim())?;
    Ok(ParamVector(x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect()))
}

pub fn l2_norm(x: &ParamVector) -> f64 {
    x.0.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &ParamVector, y: &ParamVector) -> Result<f64, LinalgError> {
    check_dims(x.dim(), y.dim())?;
    Ok(x.0.iter().zip(&y.0).map(|(a, b)| a * b).sum())
}

/// Small dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from row-major data, symmetrising as `(A + Aᵀ)/2`.
    pub fn from_rows(n: usize, rows: &[f64]) -> Result<Self, LinalgError> {
        check_dims(n * n, rows.len())?;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = 0.5 * (rows[i * n + j] + rows[j * n + i]);
            }
        }
        Ok(m)
    }

    pub fn outer(v: &ParamVector) -> Self {
        let n = v.dim();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn add_scaled(&mut self, a: f64, other: &SymMatrix) -> Result<(), LinalgError> {
        check_dims(self.n, other.n)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn mul_vec(&self, v: &ParamVector) -> Result<ParamVector, LinalgError> {
        check_dims(self.n, v.dim())?;
        let out = (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(ParamVector(out))
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: &ParamVector) -> Result<f64, LinalgError> {
        dot(v, &self.mul_vec(v)?)
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cyclic Jacobi eigendecomposition. Returns eigenvalues in ascending order
    /// and the matching eigenvectors as the columns of `vectors`.
    pub fn eigen(&self) -> SymEigen {
        let n = self.n;
        let mut a = self.clone();
        // eigenvector accumulator, not symmetric
        let mut v = SymMatrix::identity(n).data;
        let scale = a.frobenius().max(f64::MIN_POSITIVE);
        for _sweep in 0..100 {
            if a.off_diagonal_norm() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.data[k * n + p];
                        let akq = a.data[k * n + q];
                        a.data[k * n + p] = c * akp - s * akq;
                        a.data[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a.data[p * n + k];
                        let aqk = a.data[q * n + k];
                        a.data[p * n + k] = c * apk - s * aqk;
                        a.data[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
        let values = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vectors = vec![0.0; n * n];
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..n {
                vectors[row * n + new_col] = v[row * n + old_col];
            }
        }
        SymEigen { n, values, vectors }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigen().values.last().expect("non-empty matrix")
    }

    /// Principal square root of a positive semidefinite matrix. Negative
    /// eigenvalues produced by rounding are clamped at zero; the number of
    /// clamped eigenvalues is returned alongside the root.
    pub fn psd_sqrt(&self) -> (SymMatrix, usize) {
        let eig = self.eigen();
        let mut clamped = 0;
        let roots: Vec<f64> = eig
            .values
            .iter()
            .map(|&l| {
                if l < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    l.sqrt()
                }
            })
            .collect();
        (eig.reconstruct_with(&roots), clamped)
    }
}

#[derive(Debug, Clone)]
pub struct SymEigen {
    n: usize,
    pub values: Vec<f64>,
    /// Row-major `n × n`, eigenvectors in columns.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    /// `V diag(values) Vᵀ`.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymMatrix {
        let n = self.n;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| self.vectors[i * n + k] * values[k] * self.vectors[j * n + k])
                    .sum();
                m.set(i, j, s);
            }
        }
        m
    }
}
