//! Full-matrix Adagrad viewed as an auxiliary problem: the step minimizes
//! `(θ−θ_t)ᵀg_t + (1/2α)(θ−θ_t)ᵀG^{1/2}(θ−θ_t)`, and replacing the square root
//! by `I + G/4` gives a quadratic upper bound.

use super::DiagnosticsError;
use crate::linalg::{dot, ParamVector, SymMatrix};

const MAX_DIM: usize = 8;
const MAX_HISTORY: usize = 32;
const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdagradTerms {
    /// `(θ−θ_t)ᵀg_t`
    pub t1: f64,
    /// `(1/2α)(θ−θ_t)ᵀG^{1/2}(θ−θ_t)`
    pub t2: f64,
    /// `‖θ−θ_t‖²/(2α)`
    pub t3: f64,
    /// `(1/8α)Σ_τ((θ−θ_t)ᵀg_τ)²`
    pub t4: f64,
    /// `T₁ + T₂ ≤ T₁ + T₃ + T₄` up to `1e-12·(1 + |T₁| + T₃ + T₄)`.
    pub bound_holds: bool,
    /// Negative eigenvalues of `G` zeroed before taking the root.
    pub clamped: usize,
}

fn accumulate(g_history: &[ParamVector]) -> Result<SymMatrix, DiagnosticsError> {
    let t = g_history.len();
    let d = g_history.first().map_or(0, ParamVector::dim);
    if d == 0 || d > MAX_DIM || t == 0 || t > MAX_HISTORY {
        return Err(DiagnosticsError::DecompositionSize { d, t });
    }
    let mut g = SymMatrix::zeros(d);
    for gt in g_history {
        if gt.dim() != d {
            return Err(DiagnosticsError::DimensionMismatch {
                expected: d,
                found: gt.dim(),
            });
        }
        g.add_scaled(1.0, &SymMatrix::outer(gt)).expect("dimensions checked");
    }
    Ok(g)
}

fn displacement(theta: &ParamVector, theta_t: &ParamVector) -> Result<ParamVector, DiagnosticsError> {
    theta.sub(theta_t).map_err(|_| DiagnosticsError::DimensionMismatch {
        expected: theta_t.dim(),
        found: theta.dim(),
    })
}

/// The four terms at a given `θ`, with `g_t` the last entry of `g_history`.
pub fn adagrad_projection_decomposition(
    g_history: &[ParamVector],
    theta: &ParamVector,
    theta_t: &ParamVector,
    alpha: f64,
) -> Result<AdagradTerms, DiagnosticsError> {
    let g = accumulate(g_history)?;
    let delta = displacement(theta, theta_t)?;
    if delta.dim() != g.dim() {
        return Err(DiagnosticsError::DimensionMismatch {
            expected: g.dim(),
            found: delta.dim(),
        });
    }
    let (root, clamped) = g.psd_sqrt();
    let gt = g_history.last().expect("non-empty history");
    let t1 = dot(&delta, gt).expect("dimensions checked");
    let t2 = root.quad_form(&delta).expect("dimensions checked") / (2.0 * alpha);
    let t3 = delta.norm().powi(2) / (2.0 * alpha);
    let t4 = g_history
        .iter()
        .map(|g| dot(&delta, g).expect("dimensions checked").powi(2))
        .sum::<f64>()
        / (8.0 * alpha);
    Ok(AdagradTerms {
        t1,
        t2,
        t3,
        t4,
        bound_holds: t1 + t2 <= t1 + t3 + t4 + BOUND_TOL * (1.0 + t1.abs() + t3 + t4),
        clamped,
    })
}

/// `(T₁+T₂, T₁+T₃+T₄)` at `θ`: the square-root objective and its upper bound.
pub fn adagrad_objectives(
    g_history: &[ParamVector],
    theta: &ParamVector,
    theta_t: &ParamVector,
    alpha: f64,
) -> Result<(f64, f64), DiagnosticsError> {
    let t = adagrad_projection_decomposition(g_history, theta, theta_t, alpha)?;
    Ok((t.t1 + t.t2, t.t1 + t.t3 + t.t4))
}

/// Unconstrained minimizers of the two objectives:
/// `θ_t − α G^{+1/2} g_t` (pseudo-inverse) and `θ_t − α (I + G/4)^{−1} g_t`.
pub fn adagrad_minimizers(
    g_history: &[ParamVector],
    theta_t: &ParamVector,
    alpha: f64,
) -> Result<(ParamVector, ParamVector), DiagnosticsError> {
    let g = accumulate(g_history)?;
    if theta_t.dim() != g.dim() {
        return Err(DiagnosticsError::DimensionMismatch {
            expected: g.dim(),
            found: theta_t.dim(),
        });
    }
    let gt = g_history.last().expect("non-empty history");
    let eig = g.eigen();
    let cutoff = 1e-12 * eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let inv_root: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    let inv_bound: Vec<f64> = eig.values.iter().map(|&l| 1.0 / (1.0 + l.max(0.0) / 4.0)).collect();
    let step4 = eig.reconstruct_with(&inv_root).mul_vec(gt).expect("dimensions checked");
    let step5 = eig
        .reconstruct_with(&inv_bound)
        .mul_vec(gt)
        .expect("dimensions checked");
    let m4 = theta_t.sub(&step4.scaled(alpha)).expect("dimensions checked");
    let m5 = theta_t.sub(&step5.scaled(alpha)).expect("dimensions checked");
    Ok((m4, m5))
}
