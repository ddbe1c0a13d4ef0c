use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean (0 for fewer than two samples).
    pub stderr: f64,
    pub count: usize,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n as f64;
    let stderr = if n > 1 {
        let ss = xs.iter().map(|x| (x - mean).powi(2)).collect::<KahanSum>().value();
        (ss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, stderr, count: n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Fit of `log y` against `log x`; the slope is the empirical order.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// `(bound − observed)/stderr`, infinite when the standard error vanishes.
pub fn margin(observed: f64, bound: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        (bound - observed) / stderr
    } else if observed <= bound + 1e-12 * bound.abs().max(1.0) {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}
