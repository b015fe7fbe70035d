//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use cpsim::checks::{self, CheckRow, Verdict};
use cpsim::config::{ExperimentConfig, Mode, QuasiWindow, TMaxRule};
use cpsim::quasi::quasi_stationary_estimate;
use cpsim::scaling::{fit_scaling, Regime};
use cpsim::sweep::{run_sweep, sweep_csv_string, with_threads};
use cpsim_core::dynamics;
use cpsim_core::env::{ClassProfile, DistSpec, EnvMode, Environment, Role};
use cpsim_core::meanfield::{critical_lambda, integrate_mean_field, solve_x_star, stable_proportion};
use cpsim_core::oracle::exact_extinction_oracle;
use cpsim_core::seed::{derive_seed_path, rng_from_seed, Stream};
use cpsim_core::stats::MeanStderr;
use cpsim_core::theory::{self, TheoryError};
use rand::Rng;

type Verdicts = Result<String, String>;

fn rho_one() -> DistSpec {
    DistSpec::constant(1.0, Role::EdgeWeight)
}

fn xi_one() -> DistSpec {
    DistSpec::constant(1.0, Role::RecoveryRate)
}

fn xi_two_class() -> DistSpec {
    DistSpec::two_point([1.0, 2.0], [0.5, 0.5], Role::RecoveryRate)
}

fn ensure(ok: bool, detail: String) -> Verdicts {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn critical_values() -> Verdicts {
    let half = DistSpec::two_point([0.0, 1.0], [0.5, 0.5], Role::EdgeWeight);
    let got = [
        critical_lambda(&rho_one(), &xi_one()).map_err(|e| e.to_string())?,
        critical_lambda(&half, &xi_one()).map_err(|e| e.to_string())?,
        critical_lambda(&rho_one(), &xi_two_class()).map_err(|e| e.to_string())?,
    ];
    let want = [1.0, 2.0, 4.0 / 3.0];
    let err = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-12, format!("λ_c = {got:?}, max error {err:.1e}"))
}

/// Root of `E[λ/(ξ + λx)] = 1` located on a uniform grid, ρ ≡ 1.
fn grid_root(lambda: f64, atoms: &[(f64, f64)]) -> f64 {
    let h = |x: f64| atoms.iter().map(|&(y, p)| p * lambda / (y + lambda * x)).sum::<f64>();
    let steps = 1_000_000;
    let mut prev = (0.0, h(0.0) - 1.0);
    for i in 1..=steps {
        let x = i as f64 / steps as f64;
        let v = h(x) - 1.0;
        if v <= 0.0 {
            // Linear interpolation inside the last cell.
            return prev.0 + (x - prev.0) * prev.1 / (prev.1 - v);
        }
        prev = (x, v);
    }
    f64::NAN
}

fn fixed_points() -> Verdicts {
    let single = solve_x_star(2.0, &rho_one(), &xi_one(), 1e-12).map_err(|e| e.to_string())?;
    let two = solve_x_star(2.0, &rho_one(), &xi_two_class(), 1e-12).map_err(|e| e.to_string())?;
    let golden = (5f64.sqrt() - 1.0) / 4.0;
    let scan_single = grid_root(2.0, &[(1.0, 1.0)]);
    let scan_two = grid_root(2.0, &[(1.0, 0.5), (2.0, 0.5)]);
    let exact = (single - 0.5).abs().max((two - golden).abs());
    let scan = (single - scan_single).abs().max((two - scan_two).abs());
    ensure(
        exact < 1e-10 && scan < 1e-8,
        format!("x* = {single}, {two}; closed-form error {exact:.1e}, grid-scan gap {scan:.1e}"),
    )
}

fn ode_convergence() -> Verdicts {
    let one = ClassProfile::single(1.0);
    let sup = integrate_mean_field(2.0, &one, 1.0, &[0.9], 1e-3, 50.0).map_err(|e| e.to_string())?;
    let f_sup = sup.last().ok_or("empty trajectory")?.1[0];
    // Closed form of f' = -f - 0.8 f^2 + 0.8 f: 1/f = (1/f0 + 4) e^{0.2 t} - 4.
    let sub = integrate_mean_field(0.8, &one, 1.0, &[0.9], 1e-3, 200.0).map_err(|e| e.to_string())?;
    let f_sub = sub.last().ok_or("empty trajectory")?.1[0];
    let closed = 1.0 / ((1.0 / 0.9 + 4.0) * (0.2f64 * 200.0).exp() - 4.0);
    let two = ClassProfile::new(vec![1.0, 2.0], vec![0.5, 0.5]).map_err(|e| e.to_string())?;
    let golden = (5f64.sqrt() - 1.0) / 4.0;
    let f_star = stable_proportion(2.0, golden, &two, 1.0);
    let multi = integrate_mean_field(2.0, &two, 1.0, &[0.9, 0.9], 1e-3, 50.0).map_err(|e| e.to_string())?;
    let gap_two = multi.last().ok_or("empty trajectory")?.1.iter().zip(&f_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(
        (f_sup - 0.5).abs() < 1e-6 && f_sub < 1e-6 && (f_sub - closed).abs() < 1e-12 && gap_two < 1e-6,
        format!("λ=2: |f_50 − 1/2| = {:.1e}; two-class gap {gap_two:.1e}; λ=0.8: f_200 = {f_sub:.2e}", (f_sup - 0.5).abs()),
    )
}

fn oracle_equivalence() -> Verdicts {
    let mut worst = 0.0f64;
    let mut report = Vec::new();
    let hetero = |n: usize| Environment::sample(
        &DistSpec::uniform(0.0, 1.0, Role::EdgeWeight),
        &xi_two_class(),
        n,
        derive_seed_path(7, Stream::Environment, &[n as u64]),
        EnvMode::Iid,
    );
    for heterogeneous in [false, true] {
        for n in 2..=4 {
            let env = if heterogeneous {
                hetero(n).map_err(|e| e.to_string())?
            } else {
                Environment::homogeneous(vec![1.0; n], 1.0).map_err(|e| e.to_string())?
            };
            for lambda in [0.5, 1.0, 2.0] {
                for init in [(0..n).collect::<Vec<_>>(), vec![0]] {
                    let exact = exact_extinction_oracle(&env, lambda, &init).map_err(|e| e.to_string())?;
                    let times: Vec<f64> = (0..100_000u64)
                        .map(|r| {
                            let seed = derive_seed_path(11, Stream::Dynamics, &[heterogeneous as u64, n as u64, lambda.to_bits(), init.len() as u64, r]);
                            dynamics::run(&env, lambda, &init, 1e9, seed, None).map(|o| o.extinction_time.unwrap_or(f64::NAN))
                        })
                        .collect::<Result<_, _>>()
                        .map_err(|e| e.to_string())?;
                    let m = MeanStderr::of(&times);
                    let z = (m.mean - exact).abs() / m.stderr;
                    worst = worst.max(z);
                    if !heterogeneous && n == 2 && lambda == 2.0 {
                        report.push(format!("{}={exact}", if init.len() == 2 { "full" } else { "single" }));
                    }
                }
            }
        }
    }
    let homog = Environment::homogeneous(vec![1.0; 2], 1.0).map_err(|e| e.to_string())?;
    let full = exact_extinction_oracle(&homog, 2.0, &[0, 1]).map_err(|e| e.to_string())?;
    let single = exact_extinction_oracle(&homog, 2.0, &[0]).map_err(|e| e.to_string())?;
    ensure(
        worst < 4.0 && (full - 2.0).abs() < 1e-12 && (single - 1.5).abs() < 1e-12,
        format!("36 cells, worst |z| = {worst:.2}; n=2 λ=2 oracle {}", report.join(" ")),
    )
}

fn graphical_coupling() -> Verdicts {
    let p = checks::GraphicalParams { seed: 5, ..Default::default() };
    let rows = checks::graphical_suite(&p).map_err(|e| e.to_string())?;
    let detail = rows
        .iter()
        .map(|r| format!("{} {} ({})", r.check, r.verdict.as_str(), r.estimate))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(rows.iter().all(|r| r.verdict == Verdict::Pass), detail)
}

fn scaling_config(lambda: f64, n_grid: Vec<usize>, replicas: usize, rule: TMaxRule) -> ExperimentConfig {
    let mut c = ExperimentConfig::single_cell(Mode::Sweep, rho_one(), xi_two_class(), n_grid[0], lambda);
    c.n_grid = n_grid;
    c.replicas = replicas;
    c.t_max_rule = rule;
    c.env_mode = EnvMode::Stratified;
    c.master_seed = 2024;
    c
}

fn subcritical_scaling() -> Verdicts {
    let lambda_c = critical_lambda(&rho_one(), &xi_two_class()).map_err(|e| e.to_string())?;
    let config = scaling_config(0.5 * lambda_c, vec![100, 200, 400, 800, 1600], 500, TMaxRule::LogMultiple(20.0));
    let rows = run_sweep(&config).map_err(|e| e.to_string())?;
    let fit = fit_scaling(&rows, Regime::Subcritical, 1.0).map_err(|e| e.to_string())?;
    let survival = fit.points.iter().map(|p| p.capped as f64 / p.replicas as f64).fold(0.0, f64::max);
    let means: Vec<String> = fit.points.iter().map(|p| format!("{:.2}", p.response)).collect();
    ensure(
        fit.r_squared > 0.9 && survival < 0.01,
        format!("mean T = [{}], slope {:.3}/ln n, r² = {:.4}, max survival {survival}", means.join(", "), fit.slope, fit.r_squared),
    )
}

fn supercritical_scaling() -> Verdicts {
    let lambda_c = critical_lambda(&rho_one(), &xi_two_class()).map_err(|e| e.to_string())?;
    let rule = TMaxRule::ExpCap { c: 1.0, t_cap: 1e4 };
    let config = scaling_config(2.0 * lambda_c, vec![10, 15, 20, 25, 30], 200, rule);
    let rows = run_sweep(&config).map_err(|e| e.to_string())?;
    let capped = rows.iter().filter(|r| r.extinction_time.is_none()).count();
    let fit = fit_scaling(&rows, Regime::Supercritical, 0.05).map_err(|e| e.to_string())?;
    let medians: Vec<String> = fit.points.iter().map(|p| format!("{:.1}", p.response.exp())).collect();
    ensure(
        fit.slope > 0.0 && fit.r_squared > 0.9 && capped as f64 <= 0.05 * rows.len() as f64,
        format!(
            "median T = [{}], slope {:.4}/vertex, r² = {:.4}, capped {capped}/{}",
            medians.join(", "),
            fit.slope,
            fit.r_squared,
            rows.len()
        ),
    )
}

fn metastable_proportions() -> Verdicts {
    let env = Environment::sample(&rho_one(), &xi_two_class(), 2000, 31, EnvMode::Stratified).map_err(|e| e.to_string())?;
    let window = QuasiWindow { t_burn: 20.0, t_obs: 30.0 };
    let r = quasi_stationary_estimate(&env, 2.0, 1.0, window, 8, 99).map_err(|e| e.to_string())?;
    let target = [0.381966, 0.236068];
    let err = r.fractions.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(
        err < 0.05 && r.max_deviation() < 0.05,
        format!(
            "fractions ({:.4}, {:.4}) vs f* ({:.6}, {:.6}); survivors {}/{}; occupancy of Ũ_n(x*/2) {:.4}",
            r.fractions[0], r.fractions[1], r.f_star[0], r.f_star[1], r.survivors, r.replicas, r.occupancy
        ),
    )
}

fn rows_summary(rows: &[CheckRow]) -> String {
    rows.iter()
        .map(|r| format!("{} → {:.4}", r.parameter, r.estimate))
        .collect::<Vec<_>>()
        .join(", ")
}

fn range_asymptotics() -> Verdicts {
    let rows = checks::range_check(&checks::RangeParams { seed: 46, ..Default::default() }).map_err(|e| e.to_string())?;
    ensure(rows.len() == 7 && checks::all_pass(&rows), rows_summary(&rows))
}

fn coupon_bound() -> Verdicts {
    let exact = theory::coupon_lhs_exact(3, 3, 1.0 / 3.0).map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(4242);
    let r = theory::coupon_bound_check(1000, 30, 0.3, 2.0, 100_000, &mut rng).map_err(|e| e.to_string())?;
    ensure(
        exact == 0.5 && r.lhs <= r.rhs + 3.0 * r.stderr,
        format!("exact P(R_3 ≤ 2) on C_3 = {exact}; MC LHS {:.3e} ± {:.1e} ≤ RHS {:.4e}", r.lhs, r.stderr, r.rhs),
    )
}

/// `E[λEρ/(ξ + λaEρ)]` summed directly over the atoms.
fn h_direct(a: f64, lambda: f64, e_rho: f64, atoms: &[(f64, f64)]) -> f64 {
    atoms.iter().map(|&(y, p)| p * lambda * e_rho / (y + lambda * a * e_rho)).sum()
}

fn drift_machinery() -> Verdicts {
    let mut rng = rng_from_seed(511);
    let mut worst = 0.0f64;
    let mut draws = 0;
    while draws < 100 {
        let k = rng.random_range(1..=3);
        let mut y: Vec<f64> = (0..k).map(|_| 1.0 + 3.0 * rng.random::<f64>()).collect();
        y.sort_by(f64::total_cmp);
        y.dedup();
        let mut q: Vec<f64> = y.iter().map(|_| 0.1 + rng.random::<f64>()).collect();
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= total);
        let Ok(profile) = ClassProfile::new(y.clone(), q.clone()) else { continue };
        let e_rho = 0.2 + 0.8 * rng.random::<f64>();
        let rho = DistSpec::two_point([0.0, 1.0], [1.0 - e_rho, e_rho], Role::EdgeWeight);
        let xi = DistSpec::finite(profile.rates().to_vec(), profile.probs().to_vec(), Role::RecoveryRate);
        let lambda_c = critical_lambda(&rho, &xi).map_err(|e| e.to_string())?;
        let lambda = lambda_c * (1.2 + 4.0 * rng.random::<f64>());
        let x_star = solve_x_star(lambda, &rho, &xi, 1e-13).map_err(|e| e.to_string())?;
        let a = x_star * (0.02 + 0.5 * rng.random::<f64>());
        let b = a + (x_star - a) * 0.9 * rng.random::<f64>();
        if b <= a {
            continue;
        }
        let atoms: Vec<(f64, f64)> = y.iter().copied().zip(q.iter().copied()).collect();
        let expected = a / b * h_direct(a, lambda, e_rho, &atoms);
        let ratios = match theory::theta_bounds(a, b, lambda, &profile, &rho) {
            Ok(d) => d.theta_plus.iter().zip(&d.theta_minus).map(|(p, m)| p / m).collect::<Vec<_>>(),
            Err(TheoryError::NoDriftGap { ratio }) => vec![ratio],
            Err(e) => return Err(e.to_string()),
        };
        for r in ratios {
            worst = worst.max((r - expected).abs() / expected.max(1.0));
        }
        draws += 1;
    }
    let rows = checks::drift_check(&checks::DriftParams { seed: 52, ..Default::default() }).map_err(|e| e.to_string())?;
    let summary = rows.iter().find(|r| r.check == "drift-summary").ok_or("missing summary row")?;
    let exact_bracket = rows.iter().filter(|r| r.check == "drift-up").all(|r| r.stderr == Some(0.0));
    ensure(
        worst <= 1e-12 && checks::all_pass(&rows) && exact_bracket,
        format!("ratio identity over {draws} draws, worst gap {worst:.1e}; drift check {} ({})", summary.verdict.as_str(), summary.parameter),
    )
}

fn dominating_walk() -> Verdicts {
    let rows = checks::walk_check(&checks::WalkParams { seed: 53, ..Default::default() }).map_err(|e| e.to_string())?;
    let detail = rows.iter().map(|r| format!("{}: {:.2e} ± {:.1e}", r.parameter, r.estimate, r.stderr.unwrap_or(0.0))).collect::<Vec<_>>().join(", ");
    ensure(rows.len() == 3 && checks::all_pass(&rows), detail)
}

fn determinism() -> Verdicts {
    let mut config = ExperimentConfig::single_cell(
        Mode::Sweep,
        DistSpec::uniform(0.0, 1.0, Role::EdgeWeight),
        DistSpec::finite(vec![1.0, 1.5, 3.0], vec![0.2, 0.5, 0.3], Role::RecoveryRate),
        10,
        1.0,
    );
    config.n_grid = vec![10, 25];
    config.lambda_grid = vec![1.0, 4.0];
    config.environments = 3;
    config.replicas = 20;
    config.t_max_rule = TMaxRule::Fixed(20.0);
    config.master_seed = 77;
    let one = with_threads(Some(1), || run_sweep(&config)).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let four = with_threads(Some(4), || run_sweep(&config)).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let again = with_threads(Some(3), || run_sweep(&config)).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let (a, b, c) = (sweep_csv_string(&one), sweep_csv_string(&four), sweep_csv_string(&again));

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("sweep.json");
    std::fs::write(&cfg_path, config.to_json()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in ["1", "2", "5"] {
        let out = dir.path().join(format!("rows-{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_cpsim"))
            .args(["sweep", "--config"])
            .arg(&cfg_path)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("cpsim sweep --threads {threads} exited with {status}"));
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let cli_same = outputs.windows(2).all(|w| w[0] == w[1]) && outputs[0] == a.as_bytes();
    ensure(
        a == b && b == c && cli_same,
        format!("{} rows, {} bytes identical across 1/3/4 library threads and 1/2/5 CLI threads", one.len(), a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdicts); 13] = [
        ("critical value", critical_values),
        ("mean-field fixed point", fixed_points),
        ("ODE convergence", ode_convergence),
        ("oracle equivalence", oracle_equivalence),
        ("graphical coupling", graphical_coupling),
        ("subcritical scaling", subcritical_scaling),
        ("supercritical scaling", supercritical_scaling),
        ("metastable proportions", metastable_proportions),
        ("random-walk range", range_asymptotics),
        ("coupon-collector bound", coupon_bound),
        ("drift machinery", drift_machinery),
        ("dominating walk", dominating_walk),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{id:>2}] {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
