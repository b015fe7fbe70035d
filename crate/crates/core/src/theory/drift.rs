use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::TheoryError;
use crate::dynamics::level_proportion;
use crate::env::{ClassProfile, DistSpec, EdgeWeights, Environment, Role, Transform};
use crate::meanfield::{solve_x_star, DEFAULT_TOL};

/// Asymptotic per-class drift densities at levels `a < b`:
///
/// ```text
/// θ⁻_i = y_i · λbEρ/(y_i + λbEρ) · q_i
/// θ⁺_i = λ q_i · y_i/(y_i + λbEρ) · E[λaEρ/(ξ + λaEρ)] · Eρ
/// ```
///
/// with `α⁻_i`, `α⁺_i` at the 1/3 and 2/3 points of `(θ⁻_i, θ⁺_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftBounds {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub e_rho: f64,
    pub profile: ClassProfile,
    pub theta_minus: Vec<f64>,
    pub theta_plus: Vec<f64>,
    pub alpha_minus: Vec<f64>,
    pub alpha_plus: Vec<f64>,
}

impl DriftBounds {
    /// `θ⁺_i / θ⁻_i`, the same for every class: `(a/b) h(a)`.
    pub fn ratio(&self) -> f64 {
        self.theta_plus[0] / self.theta_minus[0]
    }
}

fn profile_law(profile: &ClassProfile) -> DistSpec {
    DistSpec::finite(profile.rates().to_vec(), profile.probs().to_vec(), Role::RecoveryRate)
}

/// Evaluates the drift densities for `0 < a < b < x*(λ)`.
pub fn theta_bounds(
    a: f64,
    b: f64,
    lambda: f64,
    profile: &ClassProfile,
    rho_spec: &DistSpec,
) -> Result<DriftBounds, TheoryError> {
    if !(a > 0.0 && b > a) {
        return Err(TheoryError::Argument("need 0 < a < b"));
    }
    let xi = profile_law(profile);
    let x_star = solve_x_star(lambda, rho_spec, &xi, DEFAULT_TOL)?;
    if b >= x_star {
        return Err(TheoryError::BeyondFixedPoint { x_star });
    }
    let e_rho = rho_spec.expectation(Transform::Identity)?;
    let s = xi.expectation(Transform::Resolvent { x: a, lambda, e_rho })? * a;
    let k = profile.k();
    let (mut theta_minus, mut theta_plus) = (Vec::with_capacity(k), Vec::with_capacity(k));
    for (&y, &q) in profile.rates().iter().zip(profile.probs()) {
        let sb = lambda * b * e_rho;
        theta_minus.push(y * sb / (y + sb) * q);
        theta_plus.push(lambda * q * y / (y + sb) * s * e_rho);
    }
    if theta_plus.iter().zip(&theta_minus).any(|(p, m)| p <= m) {
        return Err(TheoryError::NoDriftGap { ratio: theta_plus[0] / theta_minus[0] });
    }
    let third = |lo: f64, hi: f64, w: f64| lo + (hi - lo) * w;
    let alpha_minus = theta_minus.iter().zip(&theta_plus).map(|(&m, &p)| third(m, p, 1.0 / 3.0)).collect();
    let alpha_plus = theta_minus.iter().zip(&theta_plus).map(|(&m, &p)| third(m, p, 2.0 / 3.0)).collect();
    Ok(DriftBounds {
        a,
        b,
        lambda,
        e_rho,
        profile: profile.clone(),
        theta_minus,
        theta_plus,
        alpha_minus,
        alpha_plus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftVerdict {
    Holds,
    Violated,
    Inconclusive,
}

/// Per-class outcome of the empirical drift check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassDrift {
    pub class: usize,
    /// `|E|` and `|F|` in the infimum defining `b_i(A)`.
    pub e_size: usize,
    pub f_size: usize,
    /// Bracket on `b_i(A)/n`.
    pub b_lower: f64,
    pub b_upper: f64,
    /// Largest `d_i(A)/n = y_i A(i)/n` over the samples.
    pub d_max: f64,
    /// Smallest exact `q⁺_i(η)/n` over the sampled configurations.
    pub q_plus_min: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub down_verdict: DriftVerdict,
    pub up_verdict: DriftVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    pub samples: usize,
    pub classes: Vec<ClassDrift>,
    /// Every sampled `η` satisfied `Σ_{infected class-i} ξ = y_i A(i)`.
    pub q_minus_exact: bool,
    pub violated: usize,
    pub inconclusive: usize,
}

impl DriftReport {
    /// No violated inequality and at most 5% inconclusive brackets.
    pub fn passed(&self) -> bool {
        let checks = 2 * self.classes.len();
        self.q_minus_exact && self.violated == 0 && (self.inconclusive as f64) <= 0.05 * checks as f64
    }
}

/// Samples configurations with class counts in `B_n(a,b)` and checks
///
/// ```text
/// d_i(A)/n ≤ α⁻_i < α⁺_i ≤ b_i(A)/n
/// ```
///
/// `b_i(A) = (λ/n) inf Σ_{E×F} ρ` over disjoint `E, F` of the prescribed
/// sizes is bracketed: below by the sum of the `|E||F|` smallest weights,
/// above by the smallest of `pairs` random disjoint choices. Both collapse
/// to the exact value for constant weights.
#[allow(clippy::too_many_arguments)]
pub fn empirical_drift_check<R: Rng + ?Sized>(
    env: &Environment,
    lambda: f64,
    rho_spec: &DistSpec,
    a: f64,
    b: f64,
    profile: &ClassProfile,
    samples: usize,
    pairs: usize,
    rng: &mut R,
) -> Result<DriftReport, TheoryError> {
    let bounds = theta_bounds(a, b, lambda, profile, rho_spec)?;
    let labels = env.classes().filter(|c| c.profile.rates() == profile.rates()).ok_or(TheoryError::Classes)?;
    let n = env.n();
    let size = n as f64;
    let e_rho = bounds.e_rho;
    let k = profile.k();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &c) in labels.label.iter().enumerate() {
        members.get_mut(c as usize).ok_or(TheoryError::Classes)?.push(v);
    }
    let ranges: Vec<(usize, usize)> = (0..k)
        .map(|i| {
            let (y, q) = (profile.rates()[i], profile.probs()[i]);
            let lo = libm::ceil(level_proportion(y, lambda, a, e_rho) * q * size) as usize;
            let hi = (libm::floor(level_proportion(y, lambda, b, e_rho) * q * size) as usize).min(members[i].len());
            if lo > hi {
                Err(TheoryError::EmptyBox { class: i })
            } else {
                Ok((lo, hi))
            }
        })
        .collect::<Result<_, _>>()?;

    // |E| = [Σ_j level_j(a) S_n(j)], |F_i| = [y_i/(y_i + λbEρ) S_n(i)].
    let e_size = libm::floor(
        profile
            .rates()
            .iter()
            .zip(&labels.sizes)
            .map(|(&y, &s)| level_proportion(y, lambda, a, e_rho) * s as f64)
            .sum::<f64>(),
    ) as usize;
    let scale = lambda / size;
    let sorted_prefix = match env.weights() {
        EdgeWeights::Constant(_) => None,
        EdgeWeights::Table(t) => {
            let mut w = t.clone();
            w.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            let mut prefix = Vec::with_capacity(w.len() + 1);
            prefix.push(0.0);
            for x in w {
                acc += x;
                prefix.push(acc);
            }
            Some(prefix)
        }
    };

    let mut classes = Vec::with_capacity(k);
    for i in 0..k {
        let y = profile.rates()[i];
        let f_size = libm::floor(y / (y + lambda * b * e_rho) * labels.sizes[i] as f64) as usize;
        let (lower, upper) = if e_size + f_size > n {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let cells = e_size * f_size;
            match (env.weights(), &sorted_prefix) {
                (EdgeWeights::Constant(c), _) => {
                    let exact = scale * c * cells as f64;
                    (exact, exact)
                }
                (_, Some(prefix)) => {
                    let lower = scale * prefix[cells.min(prefix.len() - 1)];
                    let mut order: Vec<usize> = (0..n).collect();
                    let mut best = f64::INFINITY;
                    for _ in 0..pairs.max(1) {
                        order.partial_shuffle(rng, e_size + f_size);
                        let (e, f) = order[..e_size + f_size].split_at(e_size);
                        let sum: f64 = e.iter().flat_map(|&u| f.iter().map(move |&v| (u, v))).map(|(u, v)| env.weight(u, v)).sum();
                        best = best.min(sum);
                    }
                    (lower, scale * best)
                }
                _ => unreachable!("table weights always have a prefix table"),
            }
        };
        classes.push(ClassDrift {
            class: i,
            e_size,
            f_size,
            b_lower: lower / size,
            b_upper: upper / size,
            d_max: 0.0,
            q_plus_min: f64::INFINITY,
            alpha_minus: bounds.alpha_minus[i],
            alpha_plus: bounds.alpha_plus[i],
            down_verdict: DriftVerdict::Holds,
            up_verdict: DriftVerdict::Holds,
        });
    }

    let mut q_minus_exact = true;
    let mut infected = vec![false; n];
    for _ in 0..samples {
        infected.fill(false);
        let mut counts = vec![0usize; k];
        for i in 0..k {
            let (lo, hi) = ranges[i];
            counts[i] = rng.random_range(lo..=hi);
            let chosen = members[i].partial_shuffle(rng, counts[i]).0;
            for &v in chosen.iter() {
                infected[v] = true;
            }
        }
        let mut recovery_sum = vec![0.0; k];
        let mut q_plus = vec![0.0; k];
        for v in 0..n {
            let class = labels.label[v] as usize;
            if infected[v] {
                recovery_sum[class] += env.xi()[v];
            } else {
                let mut pressure = 0.0;
                env.for_each_neighbor(v, |j, w| {
                    if infected[j] {
                        pressure += w;
                    }
                });
                q_plus[class] += scale * pressure;
            }
        }
        for i in 0..k {
            let d = profile.rates()[i] * counts[i] as f64;
            if (recovery_sum[i] - d).abs() > 1e-9 * d.max(1.0) {
                q_minus_exact = false;
            }
            let c = &mut classes[i];
            c.d_max = c.d_max.max(d / size);
            c.q_plus_min = c.q_plus_min.min(q_plus[i] / size);
        }
    }

    let (mut violated, mut inconclusive) = (0, 0);
    for c in &mut classes {
        c.down_verdict = if c.d_max <= c.alpha_minus { DriftVerdict::Holds } else { DriftVerdict::Violated };
        c.up_verdict = if c.alpha_plus <= c.b_lower {
            DriftVerdict::Holds
        } else if c.b_upper < c.alpha_plus {
            DriftVerdict::Violated
        } else {
            DriftVerdict::Inconclusive
        };
        for v in [c.down_verdict, c.up_verdict] {
            match v {
                DriftVerdict::Violated => violated += 1,
                DriftVerdict::Inconclusive => inconclusive += 1,
                DriftVerdict::Holds => {}
            }
        }
    }
    Ok(DriftReport { samples, classes, q_minus_exact, violated, inconclusive })
}
