//! Extinction-time scaling fits: mean extinction time against `ln n` below
//! the critical value, log median extinction time against `n` above it.

use std::collections::BTreeMap;

use cpsim_core::stats::{linear_fit, median};
use serde::Serialize;
use thiserror::Error;

use crate::sweep::SweepRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subcritical,
    Supercritical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub predictor: f64,
    pub response: f64,
    pub replicas: usize,
    pub capped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub regime: Regime,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub points: Vec<ScalingPoint>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScalingError {
    #[error("need ≥ 3 sizes, got {0}")]
    TooFewSizes(usize),
    #[error("rows mix several λ values")]
    MixedLambda,
    #[error("capped runs in cells: {}", .0.iter().map(|(n, c)| format!("n={n} ({c} capped)")).collect::<Vec<_>>().join(", "))]
    Capped(Vec<(usize, usize)>),
    #[error("no extinct replica at n = {0}")]
    NoExtinction(usize),
    #[error("degenerate fit")]
    Degenerate,
}

/// Fits the regime's transform.
///
/// Subcritical: mean extinction time over extinct replicas vs `ln n`.
/// Supercritical: `ln` of the median extinction time vs `n`; any cell whose
/// capped fraction exceeds `max_capped_fraction` is an error, and capped
/// runs count as `+∞` in the median.
pub fn fit_scaling(rows: &[SweepRow], regime: Regime, max_capped_fraction: f64) -> Result<ScalingFit, ScalingError> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.lambda != first.lambda) {
            return Err(ScalingError::MixedLambda);
        }
    }
    let mut cells: BTreeMap<usize, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        cells.entry(r.n).or_default().push(r);
    }
    if cells.len() < 3 {
        return Err(ScalingError::TooFewSizes(cells.len()));
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut offending = Vec::new();
    for (&n, cell) in &cells {
        let times: Vec<f64> = cell.iter().filter_map(|r| r.extinction_time).collect();
        let capped = cell.len() - times.len();
        let (predictor, response) = match regime {
            Regime::Subcritical => {
                if times.is_empty() {
                    return Err(ScalingError::NoExtinction(n));
                }
                ((n as f64).ln(), times.iter().sum::<f64>() / times.len() as f64)
            }
            Regime::Supercritical => {
                if capped as f64 > max_capped_fraction * cell.len() as f64 {
                    offending.push((n, capped));
                    continue;
                }
                let all: Vec<f64> = cell.iter().map(|r| r.extinction_time.unwrap_or(f64::INFINITY)).collect();
                let m = median(&all).ok_or(ScalingError::NoExtinction(n))?;
                if !m.is_finite() {
                    offending.push((n, capped));
                    continue;
                }
                (n as f64, m.ln())
            }
        };
        points.push(ScalingPoint { n, predictor, response, replicas: cell.len(), capped });
    }
    if !offending.is_empty() {
        return Err(ScalingError::Capped(offending));
    }
    let x: Vec<f64> = points.iter().map(|p| p.predictor).collect();
    let y: Vec<f64> = points.iter().map(|p| p.response).collect();
    let fit = linear_fit(&x, &y).ok_or(ScalingError::Degenerate)?;
    Ok(ScalingFit {
        regime,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared.clamp(0.0, 1.0),
        residuals: fit.residuals,
        points,
    })
}
