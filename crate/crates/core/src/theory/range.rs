use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::Serialize;

use super::{proportion, TheoryError};
use crate::seed::open_unit;

/// Paths enumerated by [`enumerate_range_distribution`] at most.
pub const MAX_ENUMERATED_PATHS: u64 = 1 << 24;

/// Reusable visited-set for walks on `C_n`, cleared in `O(1)` by bumping a
/// generation stamp.
#[derive(Clone, Debug)]
struct Visited {
    stamp: Vec<u32>,
    generation: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], generation: 0 }
    }

    fn clear(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
    }

    /// Marks `v`; returns whether it was new.
    fn insert(&mut self, v: usize) -> bool {
        let fresh = self.stamp[v] != self.generation;
        self.stamp[v] = self.generation;
        fresh
    }
}

#[inline]
fn step<R: Rng + ?Sized>(n: usize, at: usize, rng: &mut R) -> usize {
    let u = rng.random_range(0..n - 1);
    if u >= at {
        u + 1
    } else {
        u
    }
}

fn range_with<R: Rng + ?Sized>(n: usize, m: usize, visited: &mut Visited, rng: &mut R) -> usize {
    visited.clear();
    if m == 0 {
        return 0;
    }
    let mut at = 0;
    visited.insert(at);
    let mut range = 1;
    for _ in 1..m {
        at = step(n, at, rng);
        range += visited.insert(at) as usize;
    }
    range
}

/// `R_m`: number of distinct vertices among `S_0, …, S_{m−1}` for the simple
/// random walk on the complete graph `C_n`, which jumps to one of the other
/// `n − 1` vertices uniformly.
pub fn srw_range<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> usize {
    assert!(n >= 2, "walk needs n ≥ 2");
    range_with(n, m, &mut Visited::new(n), rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RangeEstimate {
    pub n: usize,
    pub m: usize,
    pub phi: f64,
    pub walks: usize,
    /// Monte Carlo mean of `φ^{R_m}`.
    pub moment: f64,
    pub moment_stderr: f64,
    /// `(E φ^{R_m})^{1/m}`.
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub stderr: f64,
}

/// Estimates `(E φ^{R_m})^{1/m}`, which tends to `φ` for `m` of order
/// `log n`.
pub fn srw_range_estimate<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    phi: f64,
    walks: usize,
    rng: &mut R,
) -> Result<RangeEstimate, TheoryError> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(TheoryError::Argument("need 0 < φ < 1"));
    }
    if m == 0 || n < 2 || walks == 0 {
        return Err(TheoryError::Argument("need m ≥ 1, n ≥ 2, walks ≥ 1"));
    }
    let mut visited = Visited::new(n);
    let powers: Vec<f64> = (0..=m).map(|r| libm::pow(phi, r as f64)).collect();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..walks {
        let x = powers[range_with(n, m, &mut visited, rng)];
        sum += x;
        sum_sq += x * x;
    }
    let w = walks as f64;
    let moment = sum / w;
    let var = if walks > 1 { ((sum_sq - w * moment * moment) / (w - 1.0)).max(0.0) } else { 0.0 };
    let moment_stderr = libm::sqrt(var / w);
    let inv = 1.0 / m as f64;
    let estimate = libm::pow(moment, inv);
    let stderr = inv * libm::pow(moment, inv - 1.0) * moment_stderr;
    Ok(RangeEstimate { n, m, phi, walks, moment, moment_stderr, estimate, stderr })
}

/// Exact law of `R_m` by enumerating all `(n−1)^{m−1}` paths from vertex 0;
/// entry `r` is `P(R_m = r)`.
pub fn enumerate_range_distribution(n: usize, m: usize) -> Result<Vec<f64>, TheoryError> {
    if n < 2 || m == 0 {
        return Err(TheoryError::Argument("need m ≥ 1, n ≥ 2"));
    }
    let paths = (n as u64 - 1).checked_pow(m as u32 - 1).filter(|&p| p <= MAX_ENUMERATED_PATHS).ok_or(TheoryError::TooLarge)?;
    let mut counts = vec![0u64; m + 1];
    let mut path = vec![0usize; m];
    // Odometer over the choice index of each step.
    let mut choice = vec![0usize; m];
    for _ in 0..paths {
        for s in 1..m {
            let c = choice[s];
            path[s] = if c >= path[s - 1] { c + 1 } else { c };
        }
        let mut distinct = 0;
        for s in 0..m {
            if !path[..s].contains(&path[s]) {
                distinct += 1;
            }
        }
        counts[distinct] += 1;
        for s in (1..m).rev() {
            choice[s] += 1;
            if choice[s] < n - 1 {
                break;
            }
            choice[s] = 0;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / paths as f64).collect())
}

/// Exact `P(R_m ≤ m(1−ε))` by enumeration.
pub fn coupon_lhs_exact(n: usize, m: usize, epsilon: f64) -> Result<f64, TheoryError> {
    let law = enumerate_range_distribution(n, m)?;
    let cut = m as f64 * (1.0 - epsilon);
    Ok(law.iter().enumerate().filter(|&(r, _)| r as f64 <= cut + 1e-12).map(|(_, p)| p).sum())
}

/// `e^{−θmε} / (1 − m e^θ (1−ε)/(n−1))^{m(1−ε)}`, an upper bound on
/// `P(R_m ≤ m(1−ε))`.
pub fn coupon_rhs(n: usize, m: usize, epsilon: f64, theta: f64) -> Result<f64, TheoryError> {
    if !(epsilon > 0.0 && epsilon < 1.0 && theta > 0.0) || n < 2 || m == 0 {
        return Err(TheoryError::Argument("need 0 < ε < 1, θ > 0, m ≥ 1, n ≥ 2"));
    }
    let mf = m as f64;
    let lhs = mf * (1.0 - epsilon) * libm::exp(theta);
    if lhs >= (n - 1) as f64 {
        return Err(TheoryError::BoundVacuous { lhs });
    }
    let base = 1.0 - lhs / (n - 1) as f64;
    Ok(libm::exp(-theta * mf * epsilon - mf * (1.0 - epsilon) * libm::log(base)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouponReport {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub theta: f64,
    pub walks: usize,
    /// Monte Carlo `P(R_m ≤ m(1−ε))`.
    pub lhs: f64,
    pub stderr: f64,
    pub rhs: f64,
    /// `lhs ≤ rhs + 3·stderr`.
    pub holds: bool,
}

pub fn coupon_bound_check<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    epsilon: f64,
    theta: f64,
    walks: usize,
    rng: &mut R,
) -> Result<CouponReport, TheoryError> {
    let rhs = coupon_rhs(n, m, epsilon, theta)?;
    if walks == 0 {
        return Err(TheoryError::Argument("need walks ≥ 1"));
    }
    let cut = m as f64 * (1.0 - epsilon) + 1e-12;
    let mut visited = Visited::new(n);
    let hits = (0..walks).filter(|_| range_with(n, m, &mut visited, rng) as f64 <= cut).count();
    let (lhs, stderr) = proportion(hits as u64, walks as u64);
    Ok(CouponReport { n, m, epsilon, theta, walks, lhs, stderr, rhs, holds: lhs <= rhs + 3.0 * stderr })
}

/// `τ_j`: the first `m` with `R_m = j`, so `τ_1 = 1`.
pub fn range_hitting_time<R: Rng + ?Sized>(n: usize, j: usize, rng: &mut R) -> u64 {
    assert!(n >= 2 && (1..=n).contains(&j), "need 1 ≤ j ≤ n");
    let mut visited = Visited::new(n);
    hitting_time_with(n, j, &mut visited, rng)
}

fn hitting_time_with<R: Rng + ?Sized>(n: usize, j: usize, visited: &mut Visited, rng: &mut R) -> u64 {
    visited.clear();
    let mut at = 0;
    visited.insert(at);
    let (mut range, mut m) = (1, 1u64);
    while range < j {
        at = step(n, at, rng);
        m += 1;
        range += visited.insert(at) as usize;
    }
    m
}

/// `Σ_{l=1}^{⌈(1−ε)m⌉} W_l` with `W_l` i.i.d. geometric on `{1, 2, …}`,
/// `P(W = k) = p^{k−1}(1−p)`, `p = m(1−ε)/(n−1)`.
pub fn geometric_sum_sample<R: Rng + ?Sized>(n: usize, m: usize, epsilon: f64, rng: &mut R) -> u64 {
    let fail = m as f64 * (1.0 - epsilon) / (n - 1) as f64;
    assert!((0.0..1.0).contains(&fail), "geometric success probability must be positive");
    let terms = libm::ceil(m as f64 * (1.0 - epsilon) - 1e-12) as u64;
    if fail == 0.0 {
        return terms;
    }
    let log_fail = libm::log(fail);
    (0..terms).map(|_| 1 + libm::floor(libm::log(open_unit(rng)) / log_fail) as u64).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub j: usize,
    pub samples: usize,
    /// Largest `F_W(t) − F_τ(t)` over all `t`, in units of the combined
    /// standard error.
    pub worst_z: f64,
    pub worst_t: u64,
    pub holds: bool,
}

/// Checks that `τ_{⌈(1−ε)m⌉}` is stochastically dominated by the geometric
/// sum: `F_τ(t) ≥ F_W(t) − 3·stderr` at every `t`.
pub fn tau_dominance_check<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    epsilon: f64,
    samples: usize,
    rng: &mut R,
) -> Result<DominanceReport, TheoryError> {
    if !(epsilon > 0.0 && epsilon < 1.0) || n < 2 || m == 0 || samples == 0 {
        return Err(TheoryError::Argument("need 0 < ε < 1, m ≥ 1, n ≥ 2, samples ≥ 1"));
    }
    if m as f64 * (1.0 - epsilon) >= (n - 1) as f64 {
        return Err(TheoryError::Argument("need m(1−ε) < n − 1"));
    }
    let j = libm::ceil(m as f64 * (1.0 - epsilon) - 1e-12) as usize;
    let mut visited = Visited::new(n);
    let mut tau: Vec<u64> = (0..samples).map(|_| hitting_time_with(n, j, &mut visited, rng)).collect();
    let mut sums: Vec<u64> = (0..samples).map(|_| geometric_sum_sample(n, m, epsilon, rng)).collect();
    tau.sort_unstable();
    sums.sort_unstable();
    let s = samples as f64;
    let (mut worst_z, mut worst_t) = (f64::NEG_INFINITY, 0);
    let mut points: Vec<u64> = tau.iter().chain(&sums).copied().collect();
    points.sort_unstable();
    points.dedup();
    for &t in &points {
        let ft = tau.partition_point(|&x| x <= t) as f64 / s;
        let fw = sums.partition_point(|&x| x <= t) as f64 / s;
        let se = libm::sqrt((ft * (1.0 - ft) + fw * (1.0 - fw)) / s).max(1.0 / s);
        let z = (fw - ft) / se;
        if z > worst_z {
            worst_z = z;
            worst_t = t;
        }
    }
    Ok(DominanceReport { j, samples, worst_z, worst_t, holds: worst_z <= 3.0 })
}
