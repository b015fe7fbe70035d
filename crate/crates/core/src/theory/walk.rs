use alloc::vec::Vec;

use rand::Rng;
use serde::Serialize;

use super::{proportion, DriftBounds, TheoryError};
use crate::seed::exponential;

/// Per-class densities of the dominating walk: coordinate `i` jumps `+1` at
/// rate `up[i]·n` and `−1` at rate `down[i]·n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkRates {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl From<&DriftBounds> for WalkRates {
    fn from(b: &DriftBounds) -> Self {
        Self { up: b.alpha_plus.clone(), down: b.alpha_minus.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkExitReport {
    pub n: usize,
    pub horizon: f64,
    pub walks: usize,
    /// Estimated `P(Z_T ∉ U)` where `U = {z : z(i) ≥ threshold(i) ∀i}`.
    pub exit_at_horizon: f64,
    pub stderr: f64,
    /// Fraction of walks outside `U` at some time in `[0, T]`.
    pub left_during: f64,
    pub left_during_stderr: f64,
}

/// Simulates `walks` independent copies of the walk from `z0` up to time
/// `horizon`.
pub fn simulate_dominating_walk<R: Rng + ?Sized>(
    rates: &WalkRates,
    n: usize,
    z0: &[i64],
    threshold: &[f64],
    horizon: f64,
    walks: usize,
    rng: &mut R,
) -> Result<WalkExitReport, TheoryError> {
    let k = rates.up.len();
    if rates.down.len() != k || z0.len() != k || threshold.len() != k {
        return Err(TheoryError::Argument("walk dimensions disagree"));
    }
    if rates.up.iter().zip(&rates.down).any(|(&u, &d)| !(u > d && d >= 0.0)) {
        return Err(TheoryError::Argument("need up > down ≥ 0 per class"));
    }
    if !(horizon >= 0.0) || walks == 0 || n == 0 {
        return Err(TheoryError::Argument("need T ≥ 0, n ≥ 1, walks ≥ 1"));
    }
    let size = n as f64;
    let total: f64 = rates.up.iter().chain(&rates.down).sum::<f64>() * size;
    let outside = |z: &[i64]| z.iter().zip(threshold).any(|(&x, &t)| (x as f64) < t);
    let (mut exits, mut left) = (0u64, 0u64);
    let mut z = z0.to_vec();
    for _ in 0..walks {
        z.copy_from_slice(z0);
        let mut ever = outside(&z);
        let mut t = 0.0;
        loop {
            t += exponential(rng, total);
            if t > horizon {
                break;
            }
            let mut u = rng.random::<f64>() * total / size;
            let mut moved = false;
            for i in 0..k {
                if u < rates.up[i] {
                    z[i] += 1;
                    moved = true;
                    break;
                }
                u -= rates.up[i];
                if u < rates.down[i] {
                    z[i] -= 1;
                    ever |= (z[i] as f64) < threshold[i];
                    moved = true;
                    break;
                }
                u -= rates.down[i];
            }
            if !moved {
                // Rounding past the last bucket: attribute to the last up-move.
                z[k - 1] += 1;
            }
        }
        exits += outside(&z) as u64;
        left += ever as u64;
    }
    let (exit_at_horizon, stderr) = proportion(exits, walks as u64);
    let (left_during, left_during_stderr) = proportion(left, walks as u64);
    Ok(WalkExitReport { n, horizon, walks, exit_at_horizon, stderr, left_during, left_during_stderr })
}
