//! Least-squares line fits used by the trend and convergence-order tests.

use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for two points).
    pub slope_se: f64,
}

impl LineFit {
    /// Half-width of the normal-approximation 95% interval for the slope.
    pub fn slope_ci(&self) -> f64 {
        1.96 * self.slope_se
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("a line fit needs at least two (x, y) pairs"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("line fit data must be finite"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("line fit abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if x.len() > 2 {
        let sse: f64 = x.iter().zip(y).map(|(a, b)| libm::pow(b - intercept - slope * a, 2.0)).sum();
        libm::sqrt(sse / (n - 2.0) / sxx)
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_se })
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(invalid("log-log fit needs positive data"));
    }
    let lx: alloc::vec::Vec<f64> = x.iter().map(|&v| libm::log(v)).collect();
    let ly: alloc::vec::Vec<f64> = y.iter().map(|&v| libm::log(v)).collect();
    fit_line(&lx, &ly)
}

/// Least-squares slope of `y` against `x` divided by `mean(y)`: the fractional
/// change of `y` per unit of `x`. A zero mean yields the raw fit.
pub fn relative_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let fit = fit_line(x, y)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean == 0.0 {
        return Ok(fit);
    }
    let s = mean.abs();
    Ok(LineFit { slope: fit.slope / s, intercept: fit.intercept / s, slope_se: fit.slope_se / s })
}
