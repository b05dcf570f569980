use super::DiagnosticsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ln y` on `ln t`.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<RateFit, DiagnosticsError> {
    if series.len() < 10 {
        return Err(DiagnosticsError::TooFewPoints(series.len()));
    }
    if let Some(&(t, y)) = series.iter().find(|(t, y)| !(*t > 0.0 && *y > 0.0)) {
        return Err(DiagnosticsError::NonPositive { t, y });
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // a constant series is fitted exactly
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(RateFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = (1..=50).map(|t| (t as f64, 1.0 / (t as f64).sqrt())).collect();
        let fit = fit_rate(&s).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
    }

    #[test]
    fn constant_series() {
        let s: Vec<_> = (1..=20).map(|t| (t as f64, 3.0)).collect();
        let fit = fit_rate(&s).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_corrected_rate_window() {
        // (1 + ln t)/√t on t ∈ {10, …, 10⁵}
        let s: Vec<_> = (10..=100_000)
            .step_by(10)
            .map(|t| {
                let t = t as f64;
                (t, (1.0 + t.ln()) / t.sqrt())
            })
            .collect();
        let fit = fit_rate(&s).unwrap();
        assert!(fit.slope > -0.5 && fit.slope < -0.3, "{}", fit.slope);
    }

    #[test]
    fn rejects_bad_series() {
        let short: Vec<_> = (1..=9).map(|t| (t as f64, 1.0)).collect();
        assert_eq!(fit_rate(&short), Err(DiagnosticsError::TooFewPoints(9)));
        let mut s: Vec<_> = (1..=12).map(|t| (t as f64, 1.0)).collect();
        s[4].1 = 0.0;
        assert!(matches!(fit_rate(&s), Err(DiagnosticsError::NonPositive { .. })));
    }
}
