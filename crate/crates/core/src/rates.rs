//! Empirical convergence rates from log-log least squares.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Number of samples above the saturation floor.
    pub points: usize,
}

/// Least-squares slope of `log(values)` against `log(gammas)` over samples
/// with `value > floor`.
pub fn fit_rate(gammas: &[f64], values: &[f64], floor: f64) -> Result<RateFit> {
    if gammas.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gammas but {} values",
            gammas.len(),
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = gammas
        .iter()
        .zip(values)
        .filter(|(g, v)| **g > 0.0 && v.is_finite() && **v > floor.max(0.0))
        .map(|(g, v)| (g.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} of {} samples above the saturation floor {floor:e}; need 3",
            pts.len(),
            values.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all usable samples share one gamma".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: my - slope * mx, points: pts.len() })
}
