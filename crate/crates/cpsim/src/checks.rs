//! Check suites behind the `graphical-check` and `theory-check`
//! subcommands. Every check yields report rows with an estimate, its
//! standard error, the bound it is compared against and a verdict.

use std::io::Write;

use cpsim_core::dynamics::{self, level_proportion, DynamicsError};
use cpsim_core::env::{ClassProfile, DistSpec, EnvError, EnvMode, Environment, Role};
use cpsim_core::graphical::GraphicalError;
use cpsim_core::seed::{derive_seed, derive_seed_path, rng_from_seed, Stream};
use cpsim_core::stats::MeanStderr;
use cpsim_core::theory::{self, TheoryError, WalkRates};
use cpsim_core::GraphicalRealization;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::sweep::SCHEMA_LINE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub parameter: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub bound: Option<f64>,
    pub verdict: Verdict,
}

impl CheckRow {
    fn new(check: &str, parameter: String, estimate: f64, stderr: Option<f64>, bound: Option<f64>, verdict: Verdict) -> Self {
        Self { check: check.to_owned(), parameter, estimate, stderr, bound, verdict }
    }
}

/// Whether no row failed.
pub fn all_pass(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.verdict != Verdict::Fail)
}

pub fn write_check_csv<W: Write>(rows: &[CheckRow], mut out: W) -> Result<(), csv::Error> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check", "parameter", "estimate", "stderr", "bound", "verdict"])?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for r in rows {
        w.write_record([
            r.check.clone(),
            r.parameter.clone(),
            r.estimate.to_string(),
            opt(r.stderr),
            opt(r.bound),
            r.verdict.as_str().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary lines.
pub fn format_rows(rows: &[CheckRow]) -> String {
    rows.iter()
        .map(|r| {
            let mut line = format!("{:<5} {:<14} {:<28} estimate={}", r.verdict.as_str().to_uppercase(), r.check, r.parameter, r.estimate);
            if let Some(s) = r.stderr {
                line += &format!(" stderr={s:.3e}");
            }
            if let Some(b) = r.bound {
                line += &format!(" bound={b}");
            }
            line + "\n"
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Graphical(#[from] GraphicalError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("{0}")]
    Argument(String),
}

/// Parameters of the graphical-representation suite.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphicalParams {
    pub rho_spec: DistSpec,
    pub xi_spec: DistSpec,
    pub n: usize,
    pub lambda: f64,
    pub horizon: f64,
    /// Realizations used by the additivity and monotonicity checks.
    pub realizations: usize,
    pub coupling_time: f64,
    /// Samples on each side of the distributional comparison.
    pub coupling_samples: usize,
    pub seed: u64,
}

impl Default for GraphicalParams {
    fn default() -> Self {
        Self {
            rho_spec: DistSpec::uniform(0.0, 1.0, Role::EdgeWeight),
            xi_spec: DistSpec::two_point([1.0, 2.0], [0.5, 0.5], Role::RecoveryRate),
            n: 20,
            lambda: 4.0,
            horizon: 5.0,
            realizations: 100,
            coupling_time: 2.0,
            coupling_samples: 10_000,
            seed: 0,
        }
    }
}

fn random_subset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let size = rng.random_range(1..=n);
    let mut v = sample(rng, n, size).into_vec();
    v.sort_unstable();
    v
}

/// Additivity, monotonicity and distributional coupling of the graphical
/// construction against the jump-chain dynamics.
pub fn graphical_suite(p: &GraphicalParams) -> Result<Vec<CheckRow>, CheckError> {
    let env = Environment::sample(&p.rho_spec, &p.xi_spec, p.n, derive_seed(p.seed, Stream::Environment, 0), EnvMode::Iid)?;
    let n = p.n;
    let results: Vec<(bool, bool)> = (0..p.realizations)
        .into_par_iter()
        .map(|i| {
            let g = GraphicalRealization::sample(&env, p.lambda, p.horizon, derive_seed_path(p.seed, Stream::Graphical, &[0, i as u64]))?;
            let mut rng = rng_from_seed(derive_seed_path(p.seed, Stream::Graphical, &[1, i as u64]));
            let a = random_subset(n, &mut rng);
            let additive = g.check_additivity(&a, p.horizon)?;
            let extra = random_subset(n, &mut rng);
            let mut b = a.clone();
            b.extend(extra);
            b.sort_unstable();
            b.dedup();
            let mut monotone = true;
            for k in 0..=4 {
                let t = p.horizon * k as f64 / 4.0;
                let (ea, eb) = (g.evolve(&a, t)?, g.evolve(&b, t)?);
                monotone &= ea.iter().all(|v| eb.binary_search(v).is_ok());
            }
            Ok((additive, monotone))
        })
        .collect::<Result<_, CheckError>>()?;
    let total = results.len().max(1) as f64;
    let additive = results.iter().filter(|r| r.0).count();
    let monotone = results.iter().filter(|r| r.1).count();
    let param = format!("n={n} T={}", p.horizon);
    let mut rows = vec![
        CheckRow::new("additivity", param.clone(), additive as f64 / total, None, Some(1.0), Verdict::from_bool(additive == results.len())),
        CheckRow::new("monotonicity", param, monotone as f64 / total, None, Some(1.0), Verdict::from_bool(monotone == results.len())),
    ];

    let full: Vec<usize> = (0..n).collect();
    let t = p.coupling_time;
    let graphical: Vec<f64> = (0..p.coupling_samples)
        .into_par_iter()
        .map(|i| {
            let g = GraphicalRealization::sample(&env, p.lambda, t, derive_seed_path(p.seed, Stream::Graphical, &[2, i as u64]))?;
            Ok(g.evolve(&full, t)?.len() as f64)
        })
        .collect::<Result<_, CheckError>>()?;
    let chain: Vec<f64> = (0..p.coupling_samples)
        .into_par_iter()
        .map(|i| {
            let out = dynamics::run(&env, p.lambda, &full, t, derive_seed_path(p.seed, Stream::Dynamics, &[3, i as u64]), None)?;
            Ok(out.final_count as f64)
        })
        .collect::<Result<_, CheckError>>()?;
    let (a, b) = (MeanStderr::of(&graphical), MeanStderr::of(&chain));
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    rows.push(CheckRow::new(
        "coupling",
        format!("t={t} samples={}", p.coupling_samples),
        a.mean - b.mean,
        Some(se),
        Some(4.0 * se),
        Verdict::from_bool((a.mean - b.mean).abs() <= 4.0 * se),
    ));
    Ok(rows)
}

/// `⌈C ln n⌉` for `C` spread evenly over `[2, 6]` at `points` values.
pub fn range_m_points(n: usize, points: usize) -> Vec<usize> {
    let ln = (n as f64).ln();
    let (lo, hi) = ((2.0 * ln).ceil() as usize, (6.0 * ln).ceil() as usize);
    let mut ms: Vec<usize> = (0..points)
        .map(|i| if points == 1 { lo } else { lo + ((hi - lo) as f64 * i as f64 / (points - 1) as f64).round() as usize })
        .collect();
    ms.dedup();
    ms
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeParams {
    pub n: usize,
    pub phi: f64,
    pub walks: usize,
    pub points: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for RangeParams {
    fn default() -> Self {
        Self { n: 10_000, phi: 0.5, walks: 10_000, points: 5, tolerance: 0.02, seed: 0 }
    }
}

/// `(E φ^{R_m})^{1/m}` against `φ`: exact at `m ∈ {1, 2}`, within the
/// tolerance for `m` of order `log n`.
pub fn range_check(p: &RangeParams) -> Result<Vec<CheckRow>, CheckError> {
    let mut ms = vec![1, 2];
    ms.extend(range_m_points(p.n, p.points));
    ms.into_par_iter()
        .map(|m| {
            let mut rng = rng_from_seed(derive_seed_path(p.seed, Stream::Theory, &[46, m as u64]));
            let e = theory::srw_range_estimate(p.n, m, p.phi, p.walks, &mut rng)?;
            let tol = if m <= 2 { 1e-15 } else { p.tolerance };
            let ok = (e.estimate - p.phi).abs() < tol;
            Ok(CheckRow::new("range", format!("n={} m={m}", p.n), e.estimate, Some(e.stderr), Some(p.phi), Verdict::from_bool(ok)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouponParams {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub theta: f64,
    pub walks: usize,
    pub seed: u64,
}

impl Default for CouponParams {
    fn default() -> Self {
        Self { n: 1000, m: 30, epsilon: 0.3, theta: 2.0, walks: 100_000, seed: 0 }
    }
}

/// Exact `P(R_3 ≤ 2) = 1/2` on `C_3`, then the Monte Carlo tail against the
/// explicit coupon-collector bound and the `τ` dominance by a geometric sum.
pub fn coupon_check(p: &CouponParams) -> Result<Vec<CheckRow>, CheckError> {
    let exact = theory::coupon_lhs_exact(3, 3, 1.0 / 3.0)?;
    let mut rows = vec![CheckRow::new(
        "coupon-exact",
        "n=3 m=3 eps=1/3".to_owned(),
        exact,
        None,
        Some(0.5),
        Verdict::from_bool((exact - 0.5).abs() < 1e-15),
    )];
    let mut rng = rng_from_seed(derive_seed(p.seed, Stream::Theory, 442));
    let r = theory::coupon_bound_check(p.n, p.m, p.epsilon, p.theta, p.walks, &mut rng)?;
    let param = format!("n={} m={} eps={} theta={}", p.n, p.m, p.epsilon, p.theta);
    rows.push(CheckRow::new("coupon-bound", param, r.lhs, Some(r.stderr), Some(r.rhs), Verdict::from_bool(r.holds)));
    let d = theory::tau_dominance_check(p.n, p.m, p.epsilon, p.walks.min(20_000), &mut rng)?;
    rows.push(CheckRow::new(
        "tau-dominance",
        format!("n={} j={}", p.n, d.j),
        d.worst_z,
        None,
        Some(3.0),
        Verdict::from_bool(d.holds),
    ));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftParams {
    pub rho_spec: DistSpec,
    pub xi_spec: DistSpec,
    pub n: usize,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub samples: usize,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self {
            rho_spec: DistSpec::constant(1.0, Role::EdgeWeight),
            xi_spec: DistSpec::constant(1.0, Role::RecoveryRate),
            n: 2000,
            lambda: 2.0,
            a: 0.1,
            b: 0.105,
            samples: 200,
            pairs: 1000,
            seed: 0,
        }
    }
}

/// Drift densities and the sampled drift inequalities on a stratified
/// environment.
pub fn drift_check(p: &DriftParams) -> Result<Vec<CheckRow>, CheckError> {
    let profile = ClassProfile::from_spec(&p.xi_spec).map_err(|e| CheckError::Argument(e.to_string()))?;
    let bounds = theory::theta_bounds(p.a, p.b, p.lambda, &profile, &p.rho_spec)?;
    let env = Environment::sample(&p.rho_spec, &p.xi_spec, p.n, derive_seed(p.seed, Stream::Environment, 0), EnvMode::Stratified)?;
    let mut rng = rng_from_seed(derive_seed(p.seed, Stream::Theory, 51));
    let report = theory::empirical_drift_check(&env, p.lambda, &p.rho_spec, p.a, p.b, &profile, p.samples, p.pairs, &mut rng)?;
    let mut rows = vec![CheckRow::new(
        "theta-ratio",
        format!("a={} b={}", p.a, p.b),
        bounds.ratio(),
        None,
        Some(1.0),
        Verdict::from_bool(bounds.ratio() > 1.0),
    )];
    rows.push(CheckRow::new(
        "q-minus-exact",
        format!("samples={}", p.samples),
        report.q_minus_exact as u8 as f64,
        None,
        Some(1.0),
        Verdict::from_bool(report.q_minus_exact),
    ));
    let map = |v: theory::DriftVerdict| match v {
        theory::DriftVerdict::Holds => Verdict::Pass,
        theory::DriftVerdict::Violated => Verdict::Fail,
        theory::DriftVerdict::Inconclusive => Verdict::Inconclusive,
    };
    for c in &report.classes {
        rows.push(CheckRow::new("drift-down", format!("class={}", c.class), c.d_max, None, Some(c.alpha_minus), map(c.down_verdict)));
        rows.push(CheckRow::new(
            "drift-up",
            format!("class={} |E|={} |F|={}", c.class, c.e_size, c.f_size),
            c.alpha_plus,
            Some(c.b_upper - c.b_lower),
            Some(c.b_lower),
            map(c.up_verdict),
        ));
    }
    rows.push(CheckRow::new(
        "drift-summary",
        format!("violated={} inconclusive={}", report.violated, report.inconclusive),
        report.inconclusive as f64 / (2 * report.classes.len()) as f64,
        None,
        Some(0.05),
        Verdict::from_bool(report.passed()),
    ));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkParams {
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    /// Exit threshold as a fraction of `n`; the walk starts at its ceiling.
    pub level: f64,
    pub sizes: Vec<usize>,
    pub horizon: f64,
    pub walks: usize,
    pub seed: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            alpha_minus: 0.3,
            alpha_plus: 0.6,
            level: level_proportion(1.0, 2.0, 0.25, 1.0),
            sizes: vec![50, 100, 200],
            horizon: 1.0,
            walks: 200_000,
            seed: 0,
        }
    }
}

/// Exit probability of the single-class dominating walk from `g(δ)` by the
/// horizon; it must decrease strictly in `n`, with disjoint two-standard-
/// error intervals between consecutive sizes.
pub fn walk_check(p: &WalkParams) -> Result<Vec<CheckRow>, CheckError> {
    let rates = WalkRates { up: vec![p.alpha_plus], down: vec![p.alpha_minus] };
    let reports = p
        .sizes
        .par_iter()
        .map(|&n| {
            let threshold = p.level * n as f64;
            let z0 = threshold.ceil() as i64;
            let mut rng = rng_from_seed(derive_seed_path(p.seed, Stream::Theory, &[52, n as u64]));
            Ok(theory::simulate_dominating_walk(&rates, n, &[z0], &[threshold], p.horizon, p.walks, &mut rng)?)
        })
        .collect::<Result<Vec<_>, CheckError>>()?;
    let mut rows = Vec::with_capacity(reports.len());
    for (i, r) in reports.iter().enumerate() {
        let (verdict, bound) = match reports.get(i + 1) {
            Some(next) => {
                let gap = (r.exit_at_horizon - 2.0 * r.stderr) - (next.exit_at_horizon + 2.0 * next.stderr);
                (Verdict::from_bool(gap > 0.0), Some(next.exit_at_horizon + 2.0 * next.stderr))
            }
            None => (Verdict::Pass, None),
        };
        rows.push(CheckRow::new("walk-exit", format!("n={} T={}", r.n, r.horizon), r.exit_at_horizon, Some(r.stderr), bound, verdict));
    }
    Ok(rows)
}
