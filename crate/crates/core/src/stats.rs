//! Small summary statistics shared by the experiment harness.

use alloc::vec::Vec;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStderr {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self { count, mean: f64::NAN, stderr: f64::NAN };
        }
        let c = count as f64;
        let mean = xs.iter().sum::<f64>() / c;
        let stderr = if count > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (c - 1.0);
            libm::sqrt(var / c)
        } else {
            0.0
        };
        Self { count, mean, stderr }
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Returns `None` for fewer than two points or constant `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let k = x.len();
    if k < 2 || y.len() != k {
        return None;
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LinearFit { slope, intercept, r_squared, residuals })
}

/// Median with `+∞` allowed; `None` for an empty slice or NaN entries.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() || xs.iter().any(|x| x.is_nan()) {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}
