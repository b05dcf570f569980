//! Scalar telescoping inequalities in `(β̂_i, β̂_{i+1}, i)` swept over a grid.

use super::BoundReport;

const SWEEP_TOL: f64 = 1e-12;

/// `0` followed by 199 log-spaced points from `1e-4` to `1/12`.
pub fn default_beta_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), (1.0f64 / 12.0).ln());
    let mut grid = vec![0.0];
    grid.extend((0..199).map(|k| (lo + (hi - lo) * k as f64 / 198.0).exp()));
    // the endpoint is pinned exactly
    *grid.last_mut().expect("non-empty") = 1.0 / 12.0;
    grid
}

/// `{2, …, 1000} ∪ {10⁴, 10⁵, 10⁶}`.
pub fn default_sweep_indices() -> Vec<usize> {
    let mut v: Vec<usize> = (2..=1000).collect();
    v.extend([10_000, 100_000, 1_000_000]);
    v
}

fn k(i: f64, b: f64) -> f64 {
    (6.0 / (i + 1.0).sqrt() + 1.0) * b / ((i / (i - 1.0)).sqrt() - b)
}

/// The next-index coefficient `β̂_{i+1}/(√((i+1)/i) − β̂_{i+1})·(6/√(i+2)+1)`.
fn k_next(i: f64, b_next: f64) -> f64 {
    b_next / (((i + 1.0) / i).sqrt() - b_next) * (6.0 / (i + 2.0).sqrt() + 1.0)
}

/// Slacks (nonnegative when the inequality holds) of the four appendix
/// inequalities. Pair inequalities range over the admissible region
/// `β̂_{i+1} ≤ √((i+1)/i)·β̂_i`, which the theory-mode `Ψ` enforces.
pub fn appendix_sweep(grid: &[f64], indices: &[usize]) -> Vec<BoundReport> {
    let mut a5 = Vec::new();
    let mut a6 = Vec::new();
    let mut a7 = Vec::new();
    let mut a8 = Vec::new();
    for &i in indices {
        let i = i as f64;
        let si = i.sqrt();
        for &b in grid {
            // (6/√(i+1)+1)·β̂/(√(i/(i−1))−β̂) + 6/√(i+1) + 1 ≥ (1/√i + 1)/(1−β̂)
            let lhs = k(i, b) + 6.0 / (i + 1.0).sqrt() + 1.0;
            let rhs = (1.0 / si + 1.0) / (1.0 - b);
            a5.push((lhs - rhs) / (1.0 + rhs.abs()));
            // (1/√(i−1))·k_i ≥ (1/√i)(1/√i + 1)β̂/(1−β̂)
            let lhs = k(i, b) / (i - 1.0).sqrt();
            let rhs = (1.0 / si) * (1.0 / si + 1.0) * b / (1.0 - b);
            a6.push((lhs - rhs) / (1.0 + rhs.abs()));

            let cap = ((i + 1.0) / i).sqrt() * b;
            for &b_next in grid.iter().filter(|&&bn| bn <= cap) {
                let kn = k_next(i, b_next);
                // k′ − β̂/(1−β̂)(1/√i + 1) ≤ 1/√i
                let lhs = kn - b / (1.0 - b) * (1.0 / si + 1.0);
                a7.push((1.0 / si - lhs) / (1.0 + lhs.abs()));
                // k′ − (√(1/i)+1)/(1−β̂) + 1 ≤ 0
                let lhs = kn - ((1.0 / i).sqrt() + 1.0) / (1.0 - b) + 1.0;
                a8.push(-lhs / (1.0 + kn));
            }
        }
    }
    vec![
        BoundReport::from_slacks("lemma_a5", a5, SWEEP_TOL),
        BoundReport::from_slacks("corollary_a6", a6, SWEEP_TOL),
        BoundReport::from_slacks("lemma_a7", a7, SWEEP_TOL),
        BoundReport::from_slacks("corollary_a8", a8, SWEEP_TOL),
    ]
}
