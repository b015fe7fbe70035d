//! Mean-field analysis: the critical value `λ_c`, the fixed point `x*` of
//! `h(x) = E[λEρ / (ξ + λxEρ)] = 1`, the stable class proportions `f*`, and
//! a fourth-order Runge–Kutta integrator for the class-proportion ODE
//!
//! ```text
//! f_i' = −y_i f_i + λEρ (1 − f_i) Σ_j f_j q_j
//! ```

use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::env::{ClassProfile, DistSpec, Role, SpecError, Transform};

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum MeanFieldError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("no positive fixed point: λ = {lambda} ≤ λ_c = {lambda_c}")]
    NoFixedPoint { lambda: f64, lambda_c: f64 },
    #[error("argument out of range: {0}")]
    Argument(&'static str),
    #[error("step dt = {dt} too large to keep proportions in [0,1]; use dt ≤ {suggested}")]
    StepTooLarge { dt: f64, suggested: f64 },
    #[error("initial proportions must have one entry per class, each in [0,1]")]
    InitialState,
}

fn check_roles(rho: &DistSpec, xi: &DistSpec) -> Result<(), MeanFieldError> {
    if rho.role != Role::EdgeWeight {
        return Err(SpecError::WrongRole(Role::EdgeWeight).into());
    }
    if xi.role != Role::RecoveryRate {
        return Err(SpecError::WrongRole(Role::RecoveryRate).into());
    }
    Ok(())
}

/// `λ_c = 1 / (Eρ · E(1/ξ))`.
pub fn critical_lambda(rho: &DistSpec, xi: &DistSpec) -> Result<f64, MeanFieldError> {
    check_roles(rho, xi)?;
    let e_rho = rho.expectation(Transform::Identity)?;
    let e_inv = xi.expectation(Transform::Reciprocal)?;
    Ok(1.0 / (e_rho * e_inv))
}

/// `h(x) = E[λEρ / (ξ + λxEρ)]`, strictly decreasing on `(0, ∞)`.
pub fn h_value(x: f64, lambda: f64, rho: &DistSpec, xi: &DistSpec) -> Result<f64, MeanFieldError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(MeanFieldError::Argument("x must be positive"));
    }
    if !(lambda > 0.0) {
        return Err(MeanFieldError::Argument("λ must be positive"));
    }
    check_roles(rho, xi)?;
    let e_rho = rho.expectation(Transform::Identity)?;
    Ok(xi.expectation(Transform::Resolvent { x, lambda, e_rho })?)
}

/// Solves `h(x) = 1` by bisection. The upper end of the bracket starts at 1
/// and doubles until `h < 1`; the lower end is `0`, where `h = λ/λ_c > 1`.
///
/// Returns the midpoint of a bracket no wider than `tol` at which
/// `|h(x) − 1| ≤ tol`, unless floating point cannot shrink the bracket
/// further, in which case the best midpoint is returned.
pub fn solve_x_star(lambda: f64, rho: &DistSpec, xi: &DistSpec, tol: f64) -> Result<f64, MeanFieldError> {
    if !(tol > 0.0) {
        return Err(MeanFieldError::Argument("tol must be positive"));
    }
    let lambda_c = critical_lambda(rho, xi)?;
    if !(lambda > lambda_c) {
        return Err(MeanFieldError::NoFixedPoint { lambda, lambda_c });
    }
    let e_rho = rho.expectation(Transform::Identity)?;
    let h = |x: f64| xi.expectation(Transform::Resolvent { x, lambda, e_rho });

    let mut lo = 0.0;
    let mut hi = 1.0;
    while h(hi)? >= 1.0 {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let value = h(mid)?;
        if hi - lo <= tol && (value - 1.0).abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if value > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `f(i) = λxEρ / (y_i + λxEρ)`.
pub fn stable_proportion(lambda: f64, x: f64, profile: &ClassProfile, e_rho: f64) -> Vec<f64> {
    let s = lambda * x * e_rho;
    profile.rates().iter().map(|&y| s / (y + s)).collect()
}

/// Mean-field summary at one infection rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFieldSolution {
    pub lambda: f64,
    pub lambda_c: f64,
    /// Present iff `λ > λ_c`.
    pub x_star: Option<f64>,
    /// Present iff `x_star` is and `ξ` has finite support.
    pub f_star: Option<Vec<f64>>,
    pub e_rho: f64,
}

impl MeanFieldSolution {
    pub fn solve(lambda: f64, rho: &DistSpec, xi: &DistSpec, tol: f64) -> Result<Self, MeanFieldError> {
        let lambda_c = critical_lambda(rho, xi)?;
        let e_rho = rho.expectation(Transform::Identity)?;
        let x_star = if lambda > lambda_c {
            Some(solve_x_star(lambda, rho, xi, tol)?)
        } else {
            None
        };
        let f_star = match (x_star, xi.is_finite()) {
            (Some(x), true) => {
                let profile = ClassProfile::from_spec(xi).map_err(|_| SpecError::NotFinite)?;
                Some(stable_proportion(lambda, x, &profile, e_rho))
            }
            _ => None,
        };
        Ok(Self { lambda, lambda_c, x_star, f_star, e_rho })
    }
}

/// Sampled solution of the class-proportion ODE.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ProportionTrajectory {
    pub times: Vec<f64>,
    pub f: Vec<Vec<f64>>,
}

impl ProportionTrajectory {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.f.last()?.as_slice()))
    }
}

fn derivative(out: &mut [f64], f: &[f64], profile: &ClassProfile, c: f64) {
    let x: f64 = f.iter().zip(profile.probs()).map(|(a, q)| a * q).sum();
    for ((d, &fi), &y) in out.iter_mut().zip(f).zip(profile.rates()) {
        *d = -y * fi + c * (1.0 - fi) * x;
    }
}

/// Row-sum bound on the Jacobian of the right-hand side over `[0,1]^k`.
fn lipschitz_bound(lambda: f64, profile: &ClassProfile, e_rho: f64) -> f64 {
    let y_max = profile.rates().iter().copied().fold(0.0, f64::max);
    y_max + 2.0 * lambda * e_rho
}

/// RK4 integration from `f0` over `[0, t_end]` with step `dt`, recording
/// every step. See [`integrate_mean_field_sampled`].
pub fn integrate_mean_field(
    lambda: f64,
    profile: &ClassProfile,
    e_rho: f64,
    f0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<ProportionTrajectory, MeanFieldError> {
    integrate_mean_field_sampled(lambda, profile, e_rho, f0, dt, t_end, 1)
}

/// RK4 integration recording every `stride`-th step (and always the last).
///
/// Steps with `dt · L > 1`, where `L` bounds the Jacobian, are refused; the
/// error carries `1/L` as a usable step. The final step is shortened to end
/// exactly at `t_end`.
pub fn integrate_mean_field_sampled(
    lambda: f64,
    profile: &ClassProfile,
    e_rho: f64,
    f0: &[f64],
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<ProportionTrajectory, MeanFieldError> {
    let k = profile.k();
    if f0.len() != k || f0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(MeanFieldError::InitialState);
    }
    if !(dt > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(MeanFieldError::Argument("need dt > 0 and a finite t_end ≥ 0"));
    }
    let bound = lipschitz_bound(lambda, profile, e_rho);
    if dt * bound > 1.0 {
        return Err(MeanFieldError::StepTooLarge { dt, suggested: 1.0 / bound });
    }
    let c = lambda * e_rho;
    let stride = stride.max(1);

    let mut traj = ProportionTrajectory::default();
    traj.times.push(0.0);
    traj.f.push(f0.to_vec());

    let mut f = f0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (alloc::vec![0.0; k], alloc::vec![0.0; k], alloc::vec![0.0; k], alloc::vec![0.0; k], alloc::vec![0.0; k]);
    let steps = libm::ceil(t_end / dt - 1e-9).max(0.0) as usize;
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        let h = if step == steps { t_end - t_prev } else { dt };
        derivative(&mut k1, &f, profile, c);
        for i in 0..k {
            tmp[i] = f[i] + 0.5 * h * k1[i];
        }
        derivative(&mut k2, &tmp, profile, c);
        for i in 0..k {
            tmp[i] = f[i] + 0.5 * h * k2[i];
        }
        derivative(&mut k3, &tmp, profile, c);
        for i in 0..k {
            tmp[i] = f[i] + h * k3[i];
        }
        derivative(&mut k4, &tmp, profile, c);
        for i in 0..k {
            f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if f.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return Err(MeanFieldError::StepTooLarge { dt, suggested: 0.5 * dt });
        }
        if step % stride == 0 || step == steps {
            traj.times.push(if step == steps { t_end } else { step as f64 * dt });
            traj.f.push(f.clone());
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn one(role: Role) -> DistSpec {
        DistSpec::constant(1.0, role)
    }

    fn xi12() -> DistSpec {
        DistSpec::finite(vec![1.0, 2.0], vec![0.5, 0.5], Role::RecoveryRate)
    }

    fn golden() -> f64 {
        (5.0f64.sqrt() - 1.0) / 4.0
    }

    #[test]
    fn critical_values() {
        let rho_half = DistSpec::two_point([0.0, 1.0], [0.5, 0.5], Role::EdgeWeight);
        assert_eq!(critical_lambda(&one(Role::EdgeWeight), &one(Role::RecoveryRate)), Ok(1.0));
        assert_eq!(critical_lambda(&rho_half, &one(Role::RecoveryRate)), Ok(2.0));
        let lc = critical_lambda(&one(Role::EdgeWeight), &xi12()).unwrap();
        assert!((lc - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn h_examples() {
        let rho = one(Role::EdgeWeight);
        assert_eq!(h_value(0.5, 2.0, &rho, &one(Role::RecoveryRate)), Ok(1.0));
        let v = h_value(0.5, 2.0, &rho, &xi12()).unwrap();
        assert!((v - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        let near0 = h_value(1e-14, 2.0, &rho, &xi12()).unwrap();
        assert!((near0 - 2.0 * 0.75).abs() < 1e-12);
        assert!(h_value(0.0, 2.0, &rho, &xi12()).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let rho = one(Role::EdgeWeight);
        let x = solve_x_star(2.0, &rho, &one(Role::RecoveryRate), DEFAULT_TOL).unwrap();
        assert!((x - 0.5).abs() < 1e-11);
        let x = solve_x_star(2.0, &rho, &xi12(), DEFAULT_TOL).unwrap();
        assert!((x - golden()).abs() < 1e-11);
        let lc = 4.0 / 3.0;
        let x = solve_x_star(lc * (1.0 + 1e-9), &rho, &xi12(), DEFAULT_TOL).unwrap();
        assert!(x < 1e-6 && x > 0.0);
        assert!(matches!(
            solve_x_star(1.0, &rho, &xi12(), DEFAULT_TOL),
            Err(MeanFieldError::NoFixedPoint { .. })
        ));
    }

    #[test]
    fn stable_proportion_examples() {
        assert_eq!(stable_proportion(2.0, 0.5, &ClassProfile::single(1.0), 1.0), vec![0.5]);
        let p = ClassProfile::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let f = stable_proportion(2.0, golden(), &p, 1.0);
        assert!((f[0] - 0.381966).abs() < 1e-6 && (f[1] - 0.236068).abs() < 1e-6);
        assert!((0.5 * f[0] + 0.5 * f[1] - golden()).abs() < 1e-12);
        assert!(stable_proportion(2.0, 1e-300, &p, 1.0).iter().all(|&v| v < 1e-299));
    }

    #[test]
    fn solution_is_absent_below_threshold() {
        let rho = one(Role::EdgeWeight);
        let s = MeanFieldSolution::solve(1.0, &rho, &xi12(), DEFAULT_TOL).unwrap();
        assert_eq!(s.x_star, None);
        assert_eq!(s.f_star, None);
        let s = MeanFieldSolution::solve(2.0, &rho, &xi12(), DEFAULT_TOL).unwrap();
        assert!(s.f_star.unwrap().len() == 2);
        let cont = MeanFieldSolution::solve(3.0, &rho, &DistSpec::uniform(1.0, 2.0, Role::RecoveryRate), 1e-12).unwrap();
        assert!(cont.x_star.is_some() && cont.f_star.is_none());
    }

    #[test]
    fn ode_zero_is_absorbing() {
        let p = ClassProfile::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let t = integrate_mean_field(2.0, &p, 1.0, &[0.0, 0.0], 1e-2, 5.0).unwrap();
        assert!(t.f.iter().all(|f| f.iter().all(|&v| v == 0.0)));
        assert_eq!(t.times.len(), 501);
        assert_eq!(t.last().unwrap().0, 5.0);
    }

    #[test]
    fn ode_equilibrium_is_stationary() {
        let p = ClassProfile::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let f_star = stable_proportion(2.0, golden(), &p, 1.0);
        let t = integrate_mean_field(2.0, &p, 1.0, &f_star, 1e-3, 10.0).unwrap();
        for f in &t.f {
            for (a, b) in f.iter().zip(&f_star) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ode_matches_logistic_closed_form() {
        // f' = f − 2f², so 1/f = 2 + (1/f0 − 2) e^{−t}.
        let p = ClassProfile::single(1.0);
        let t = integrate_mean_field_sampled(2.0, &p, 1.0, &[0.9], 1e-3, 50.0, 1000).unwrap();
        for (time, f) in t.times.iter().zip(&t.f) {
            let exact = 1.0 / (2.0 + (1.0 / 0.9 - 2.0) * libm::exp(-time));
            assert!((f[0] - exact).abs() < 1e-10, "t={time}");
        }
        assert!((t.last().unwrap().1[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn ode_rejects_large_steps() {
        let p = ClassProfile::single(1.0);
        let err = integrate_mean_field(10.0, &p, 1.0, &[0.5], 0.5, 1.0).unwrap_err();
        match err {
            MeanFieldError::StepTooLarge { suggested, .. } => assert!((suggested - 1.0 / 21.0).abs() < 1e-12),
            e => panic!("{e}"),
        }
        assert!(integrate_mean_field(10.0, &p, 1.0, &[0.5], 0.01, 1.0).is_ok());
        assert_eq!(integrate_mean_field(1.0, &p, 1.0, &[1.5], 0.01, 1.0), Err(MeanFieldError::InitialState));
    }

    proptest! {
        #[test]
        fn h_strictly_decreasing(lambda in 0.1f64..10.0, y2 in 1.0f64..5.0, q in 0.05f64..0.95, mut grid in proptest::collection::vec(1e-4f64..50.0, 2..40)) {
            let xi = if y2 > 1.0 {
                DistSpec::finite(vec![1.0, y2], vec![q, 1.0 - q], Role::RecoveryRate)
            } else {
                one(Role::RecoveryRate)
            };
            let rho = DistSpec::uniform(0.0, 1.0, Role::EdgeWeight);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let hs: Vec<f64> = grid.iter().map(|&x| h_value(x, lambda, &rho, &xi).unwrap()).collect();
            for w in hs.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }

        #[test]
        fn fixed_point_residual(lambda in 0.1f64..20.0, y2 in 1.01f64..5.0, q in 0.05f64..0.95, e in 0.05f64..1.0) {
            let xi = DistSpec::finite(vec![1.0, y2], vec![q, 1.0 - q], Role::RecoveryRate);
            let rho = DistSpec::two_point([0.0, 1.0], [1.0 - e, e], Role::EdgeWeight);
            let lc = critical_lambda(&rho, &xi).unwrap();
            prop_assume!(lambda > lc * (1.0 + 1e-6));
            let tol = 1e-12;
            let x = solve_x_star(lambda, &rho, &xi, tol).unwrap();
            prop_assert!((h_value(x, lambda, &rho, &xi).unwrap() - 1.0).abs() <= tol);
            let profile = ClassProfile::from_spec(&xi).unwrap();
            let f = stable_proportion(lambda, x, &profile, e);
            let mass: f64 = f.iter().zip(profile.probs()).map(|(a, b)| a * b).sum();
            prop_assert!((mass - x).abs() <= 1e-9);
            prop_assert!(f.iter().all(|&v| v > 0.0 && v < 1.0));
            prop_assert!(f[0] > f[1]);
        }
    }
}
