use cpsim_core::dynamics::{self, ContactProcess, StepResult};
use cpsim_core::env::{ClassProfile, DistSpec, EnvMode, Environment, Role};
use cpsim_core::graphical::GraphicalRealization;
use cpsim_core::meanfield::{critical_lambda, h_value, integrate_mean_field, solve_x_star, stable_proportion};
use cpsim_core::oracle::exact_extinction_oracle;
use cpsim_core::seed::{derive_seed_path, rng_from_seed, Stream};
use cpsim_core::stats::MeanStderr;
use proptest::prelude::*;

/// Expected extinction time of the birth-death chain on `{0..n}` with
/// death rate `k` and birth rate `λ k (n-k)/n`, started at `start`.
fn birth_death_extinction(n: usize, lambda: f64, start: usize) -> f64 {
    let birth = |k: usize| lambda * k as f64 * (n - k) as f64 / n as f64;
    let death = |k: usize| k as f64;
    // T_k - T_{k-1} = sum_{j >= k} (prod_{i=k}^{j-1} b_i / prod_{i=k}^{j} d_i)
    let increment = |k: usize| {
        let mut total = 0.0;
        let mut ratio = 1.0 / death(k);
        for j in k..=n {
            total += ratio;
            if j < n {
                ratio *= birth(j) / death(j + 1);
            }
        }
        total
    };
    (1..=start).map(increment).sum()
}

#[test]
fn oracle_matches_birth_death_chain() {
    for n in 2..=8 {
        let env = Environment::homogeneous(vec![1.0; n], 1.0).unwrap();
        for lambda in [0.3, 1.0, 2.5] {
            for start in [1, n / 2, n] {
                let init: Vec<usize> = (0..start).collect();
                let exact = exact_extinction_oracle(&env, lambda, &init).unwrap();
                let chain = birth_death_extinction(n, lambda, start);
                assert!((exact - chain).abs() < 1e-9 * chain, "n={n} λ={lambda} start={start}: {exact} vs {chain}");
            }
        }
    }
}

#[test]
fn oracle_increases_in_lambda() {
    let env = Environment::sample(
        &DistSpec::uniform(0.0, 1.0, Role::EdgeWeight),
        &DistSpec::two_point([1.0, 3.0], [0.4, 0.6], Role::RecoveryRate),
        6,
        17,
        EnvMode::Iid,
    )
    .unwrap();
    let times: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&l| exact_extinction_oracle(&env, l, &[0]).unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]), "{times:?}");
}

#[test]
fn graphical_and_gillespie_agree_in_law() {
    let env = Environment::sample(
        &DistSpec::uniform(0.0, 1.0, Role::EdgeWeight),
        &DistSpec::two_point([1.0, 2.0], [0.5, 0.5], Role::RecoveryRate),
        8,
        5,
        EnvMode::Iid,
    )
    .unwrap();
    let (lambda, t) = (5.0, 1.5);
    let runs = 4000u64;
    let graphical: Vec<f64> = (0..runs)
        .map(|r| {
            let g = GraphicalRealization::sample(&env, lambda, t, derive_seed_path(1, Stream::Graphical, &[r])).unwrap();
            g.evolve(&[0, 1], t).unwrap().len() as f64
        })
        .collect();
    let direct: Vec<f64> = (0..runs)
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed_path(2, Stream::Dynamics, &[r]));
            let mut p = ContactProcess::new(&env, lambda, &[0, 1]).unwrap();
            while let StepResult::Flipped { .. } = p.step_until(t, &mut rng) {}
            p.config().count() as f64
        })
        .collect();
    let (a, b) = (MeanStderr::of(&graphical), MeanStderr::of(&direct));
    let z = (a.mean - b.mean).abs() / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!(z < 4.0, "graphical {a:?} vs direct {b:?}");
}

#[test]
fn same_seed_same_outcome() {
    let env = Environment::sample(
        &DistSpec::uniform(0.2, 1.0, Role::EdgeWeight),
        &DistSpec::constant(1.0, Role::RecoveryRate),
        30,
        9,
        EnvMode::Iid,
    )
    .unwrap();
    let a = dynamics::run(&env, 3.0, &[0, 1, 2], 50.0, 1234, Some(0.5)).unwrap();
    let b = dynamics::run(&env, 3.0, &[0, 1, 2], 50.0, 1234, Some(0.5)).unwrap();
    assert_eq!(a, b);
    let c = dynamics::run(&env, 3.0, &[0, 1, 2], 50.0, 1235, Some(0.5)).unwrap();
    assert_ne!(a.event_count, c.event_count);
}

#[test]
fn stratified_environment_has_exact_class_sizes() {
    let xi = DistSpec::finite(vec![1.0, 2.0, 5.0], vec![0.25, 0.5, 0.25], Role::RecoveryRate);
    let env = Environment::sample(&DistSpec::constant(1.0, Role::EdgeWeight), &xi, 1000, 3, EnvMode::Stratified).unwrap();
    let mut counts = [0usize; 3];
    for &y in env.xi() {
        counts[[1.0, 2.0, 5.0].iter().position(|&v| v == y).unwrap()] += 1;
    }
    assert_eq!(counts, [250, 500, 250]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ode_stays_in_unit_cube(lambda in 0.1f64..6.0, f0 in 0.0f64..=1.0, y2 in 1.0f64..4.0) {
        let profile = ClassProfile::new(vec![1.0, y2 + 0.01], vec![0.3, 0.7]).unwrap();
        let traj = integrate_mean_field(lambda, &profile, 0.8, &[f0, f0], 0.01, 10.0).unwrap();
        for f in &traj.f {
            prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn fixed_point_is_root_and_increases(y2 in 1.1f64..4.0, q in 0.1f64..0.9, scale in 1.05f64..5.0) {
        let xi = DistSpec::two_point([1.0, y2], [q, 1.0 - q], Role::RecoveryRate);
        let rho = DistSpec::two_point([0.5, 1.0], [0.5, 0.5], Role::EdgeWeight);
        let lc = critical_lambda(&rho, &xi).unwrap();
        let x1 = solve_x_star(lc * scale, &rho, &xi, 1e-12).unwrap();
        let x2 = solve_x_star(lc * scale * 1.1, &rho, &xi, 1e-12).unwrap();
        prop_assert!((h_value(x1, lc * scale, &rho, &xi).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!(x1 > 0.0 && x1 < x2 && x2 < 1.0);
        let profile = ClassProfile::from_spec(&xi).unwrap();
        let f = stable_proportion(lc * scale, x1, &profile, 0.75);
        let mean: f64 = f.iter().zip(profile.probs()).map(|(a, p)| a * p).sum();
        prop_assert!((mean - x1).abs() < 1e-9);
    }
}
