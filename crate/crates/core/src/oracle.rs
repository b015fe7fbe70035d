//! Exact expected extinction time for small `n` by solving the hitting-time
//! equations of the chain on all `2^n` configurations.
//!
//! For every nonempty state `s` with total exit rate `q_s`,
//! `q_s T_s − Σ_{s'≠∅} q(s→s') T_{s'} = 1`, which is solved by dense
//! Gaussian elimination with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::env::Environment;

pub const MAX_ORACLE_N: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("state space too large: n = {0} > {MAX_ORACLE_N}")]
    TooLarge(usize),
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("hitting-time system is singular")]
    Singular,
}

fn flip_rate(env: &Environment, lambda: f64, state: usize, i: usize) -> f64 {
    if state >> i & 1 == 1 {
        return env.xi()[i];
    }
    let n = env.n();
    let pressure: f64 = (0..n).filter(|&j| j != i && state >> j & 1 == 1).map(|j| env.weight(i, j)).sum();
    lambda / n as f64 * pressure
}

/// Expected extinction times from every state, indexed by bitmask
/// (bit `i` set ⇔ vertex `i` infected). Entry 0 is 0.
pub fn extinction_times(env: &Environment, lambda: f64) -> Result<Vec<f64>, OracleError> {
    let n = env.n();
    if n > MAX_ORACLE_N {
        return Err(OracleError::TooLarge(n));
    }
    let states = 1usize << n;
    let dim = states - 1;
    // Row r (state r+1) of the augmented matrix [A | 1].
    let width = dim + 1;
    let mut m = vec![0.0f64; dim * width];
    for s in 1..states {
        let row = (s - 1) * width;
        let mut total = 0.0;
        for i in 0..n {
            let rate = flip_rate(env, lambda, s, i);
            if rate == 0.0 {
                continue;
            }
            total += rate;
            let target = s ^ (1 << i);
            if target != 0 {
                m[row + target - 1] -= rate;
            }
        }
        m[row + s - 1] += total;
        m[row + dim] = 1.0;
    }

    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| m[a * width + col].abs().total_cmp(&m[b * width + col].abs()))
            .unwrap_or(col);
        if m[pivot * width + col].abs() < 1e-300 {
            return Err(OracleError::Singular);
        }
        if pivot != col {
            for c in col..width {
                m.swap(pivot * width + c, col * width + c);
            }
        }
        let inv = 1.0 / m[col * width + col];
        for r in col + 1..dim {
            let factor = m[r * width + col] * inv;
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = m.split_at_mut(r * width);
            let pivot_row = &upper[col * width..col * width + width];
            for (x, &p) in lower[col..width].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
        }
    }
    let mut t = vec![0.0; states];
    for r in (0..dim).rev() {
        let row = r * width;
        let mut acc = m[row + dim];
        for c in r + 1..dim {
            acc -= m[row + c] * t[c + 1];
        }
        t[r + 1] = acc / m[row + r];
    }
    Ok(t)
}

/// Expected time for `η^A` to die out.
pub fn exact_extinction_oracle(env: &Environment, lambda: f64, init: &[usize]) -> Result<f64, OracleError> {
    if env.n() > MAX_ORACLE_N {
        return Err(OracleError::TooLarge(env.n()));
    }
    let mut mask = 0usize;
    for &v in init {
        if v >= env.n() {
            return Err(OracleError::VertexOutOfRange(v));
        }
        mask |= 1 << v;
    }
    if mask == 0 {
        return Ok(0.0);
    }
    Ok(extinction_times(env, lambda)?[mask])
}
