use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context as _};
use clap::{Parser, Subcommand, ValueEnum};
use cpsim::checks::{self, CheckRow};
use cpsim::config::{load_config, ExperimentConfig, InitRule, Mode, QuasiWindow, TMaxRule};
use cpsim::quasi::quasi_stationary_estimate;
use cpsim::scaling::{fit_scaling, Regime};
use cpsim::sweep::{self, replica_seed, with_threads, SweepRow};
use cpsim::trajectory::write_trajectory_csv;
use cpsim_core::dynamics;
use cpsim_core::env::{ClassProfile, DistSpec, EnvMode, Environment, Role, Transform};
use cpsim_core::meanfield::{integrate_mean_field_sampled, MeanFieldSolution, DEFAULT_TOL};
use rayon::prelude::*;

#[derive(Parser, Debug)]
#[command(name = "cpsim", version, about = "Contact process with random recovery rates and edge weights on complete graphs")]
struct Cli {
    /// JSON experiment configuration; its mode runs when no subcommand is given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; defaults to standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(clap::Args, Debug, Clone, Default)]
struct Laws {
    /// Edge-weight law as JSON, e.g. '{"kind":"constant","values":[1],"role":"edge-weight"}'.
    #[arg(long)]
    rho: Option<String>,
    /// Recovery-rate law as JSON.
    #[arg(long)]
    xi: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical value, fixed point and stable proportions; optional ODE trajectory.
    Meanfield {
        #[command(flatten)]
        laws: Laws,
        #[arg(long)]
        lambda: Option<f64>,
        /// Integrate the ODE from this uniform initial proportion and write the trajectory to --out.
        #[arg(long)]
        f0: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Record every k-th step of the trajectory.
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Replicas of one (n, λ) cell on one environment.
    Simulate {
        #[command(flatten)]
        laws: Laws,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        /// full, single or fraction:x
        #[arg(long)]
        init: Option<InitRule>,
        #[arg(long)]
        sample_every: Option<f64>,
        /// Where to write sampled counts when --sample-every is set.
        #[arg(long)]
        samples_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EnvModeArg::Iid)]
        env_mode: EnvModeArg,
    },
    /// Full λ × n grid from --config.
    Sweep {
        /// Also fit the extinction-time scaling and print it as JSON on stderr.
        #[arg(long, value_enum)]
        fit: Option<Regime>,
        /// Largest tolerated fraction of capped runs per cell in a supercritical fit.
        #[arg(long, default_value_t = 0.0)]
        max_capped: f64,
    },
    /// Additivity, monotonicity and coupling checks of the graphical construction.
    GraphicalCheck {
        #[command(flatten)]
        laws: Laws,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        coupling_time: Option<f64>,
        #[arg(long)]
        coupling_samples: Option<usize>,
    },
    /// Numerical checks of the range, coupon, drift and dominating-walk estimates.
    TheoryCheck {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[command(flatten)]
        laws: Laws,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        walks: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        alpha_minus: Option<f64>,
        #[arg(long)]
        alpha_plus: Option<f64>,
        /// Exit threshold of the walk as a fraction of n.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Survival-conditioned time averages of class proportions against f*.
    Quasistationary {
        #[command(flatten)]
        laws: Laws,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        t_burn: Option<f64>,
        #[arg(long)]
        t_obs: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Lemma {
    #[value(name = "4.6")]
    Range,
    Coupon,
    Drift,
    Walk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnvModeArg {
    Iid,
    Stratified,
}

/// Whether every verdict passed.
type Outcome = anyhow::Result<bool>;

struct Context {
    config: Option<ExperimentConfig>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.or(self.config.as_ref().map(|c| c.master_seed)).unwrap_or(0)
    }

    fn laws(&self, laws: &Laws) -> anyhow::Result<(DistSpec, DistSpec)> {
        let parse = |text: &str, what: &str| -> anyhow::Result<DistSpec> {
            let spec: DistSpec = serde_json::from_str(text).with_context(|| format!("--{what}"))?;
            spec.validate().with_context(|| format!("--{what}"))?;
            Ok(spec)
        };
        let rho = match (&laws.rho, &self.config) {
            (Some(t), _) => parse(t, "rho")?,
            (None, Some(c)) => c.rho_spec.clone(),
            (None, None) => DistSpec::constant(1.0, Role::EdgeWeight),
        };
        let xi = match (&laws.xi, &self.config) {
            (Some(t), _) => parse(t, "xi")?,
            (None, Some(c)) => c.xi_spec.clone(),
            (None, None) => DistSpec::constant(1.0, Role::RecoveryRate),
        };
        if rho.role != Role::EdgeWeight || xi.role != Role::RecoveryRate {
            return Err(anyhow!("--rho needs role edge-weight and --xi role recovery-rate"));
        }
        Ok((rho, xi))
    }

    fn n(&self, flag: Option<usize>, default: usize) -> usize {
        flag.or(self.config.as_ref().map(|c| c.n_grid[0])).unwrap_or(default)
    }

    fn lambda(&self, flag: Option<f64>, default: f64) -> f64 {
        flag.or(self.config.as_ref().map(|c| c.lambda_grid[0])).unwrap_or(default)
    }

    fn replicas(&self, flag: Option<usize>, default: usize) -> usize {
        flag.or(self.config.as_ref().map(|c| c.replicas)).unwrap_or(default)
    }

    fn writer(&self) -> anyhow::Result<Box<dyn Write>> {
        open(self.out.as_deref())
    }
}

fn open(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.config.as_deref().map(load_config).transpose() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = Context { config, seed: cli.seed, out: cli.out, threads: cli.threads };
    let command = match (cli.command, &ctx.config) {
        (Some(c), _) => c,
        (None, Some(config)) => command_for(config.mode),
        (None, None) => {
            eprintln!("error: give a subcommand or --config");
            return ExitCode::from(2);
        }
    };
    let threads = ctx.threads;
    let result = with_threads(threads, || dispatch(&ctx, command)).map_err(anyhow::Error::from).and_then(|r| r);
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// The subcommand a configuration's mode stands for, with defaults.
fn command_for(mode: Mode) -> Command {
    let laws = Laws::default();
    match mode {
        Mode::Meanfield => Command::Meanfield { laws, lambda: None, f0: None, t_end: 50.0, dt: 0.01, stride: 10 },
        Mode::Simulate => Command::Simulate {
            laws,
            n: None,
            lambda: None,
            t_max: None,
            replicas: None,
            init: None,
            sample_every: None,
            samples_out: None,
            env_mode: EnvModeArg::Iid,
        },
        Mode::Sweep => Command::Sweep { fit: None, max_capped: 0.0 },
        Mode::GraphicalCheck => Command::GraphicalCheck {
            laws,
            n: None,
            lambda: None,
            horizon: None,
            realizations: None,
            coupling_time: None,
            coupling_samples: None,
        },
        Mode::TheoryCheck => Command::TheoryCheck {
            lemma: Lemma::Range,
            laws,
            n: None,
            m: None,
            phi: None,
            epsilon: None,
            theta: None,
            walks: None,
            lambda: None,
            a: None,
            b: None,
            samples: None,
            alpha_minus: None,
            alpha_plus: None,
            level: None,
            sizes: None,
            horizon: None,
        },
        Mode::Quasistationary => {
            Command::Quasistationary { laws, n: None, lambda: None, t_burn: None, t_obs: None, replicas: None }
        }
    }
}

fn dispatch(ctx: &Context, command: Command) -> Outcome {
    match command {
        Command::Meanfield { laws, lambda, f0, t_end, dt, stride } => meanfield(ctx, &laws, lambda, f0, t_end, dt, stride),
        Command::Simulate { laws, n, lambda, t_max, replicas, init, sample_every, samples_out, env_mode } => {
            let (rho, xi) = ctx.laws(&laws)?;
            let n = ctx.n(n, 100);
            let lambda = ctx.lambda(lambda, 2.0);
            let t_max = match (t_max, &ctx.config) {
                (Some(t), _) => t,
                (None, Some(c)) => c.t_max_rule.t_max(n),
                (None, None) => TMaxRule::default().t_max(n.max(2)),
            };
            let init = init.or(ctx.config.as_ref().map(|c| c.init)).unwrap_or_default();
            let mode = match (env_mode, &ctx.config) {
                (EnvModeArg::Stratified, _) => EnvMode::Stratified,
                (EnvModeArg::Iid, Some(c)) => c.env_mode,
                (EnvModeArg::Iid, None) => EnvMode::Iid,
            };
            let sample_every = sample_every.or(ctx.config.as_ref().and_then(|c| c.sample_every));
            simulate(ctx, &rho, &xi, n, lambda, t_max, ctx.replicas(replicas, 1), init, mode, sample_every, samples_out)
        }
        Command::Sweep { fit, max_capped } => {
            let mut config = ctx.config.clone().ok_or_else(|| anyhow!("sweep needs --config"))?;
            if let Some(s) = ctx.seed {
                config.master_seed = s;
            }
            let rows = sweep::run_sweep(&config)?;
            let out = ctx.out.clone().or(config.output.clone());
            let mut w = open(out.as_deref())?;
            sweep::write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            if let Some(regime) = fit {
                let fit = fit_scaling(&rows, regime, max_capped)?;
                eprintln!("{}", serde_json::to_string_pretty(&fit)?);
            }
            Ok(true)
        }
        Command::GraphicalCheck { laws, n, lambda, horizon, realizations, coupling_time, coupling_samples } => {
            let d = checks::GraphicalParams::default();
            let (rho_spec, xi_spec) = match (&laws.rho, &laws.xi, &ctx.config) {
                (None, None, None) => (d.rho_spec.clone(), d.xi_spec.clone()),
                _ => ctx.laws(&laws)?,
            };
            let p = checks::GraphicalParams {
                rho_spec,
                xi_spec,
                n: ctx.n(n, d.n),
                lambda: ctx.lambda(lambda, d.lambda),
                horizon: horizon.unwrap_or(d.horizon),
                realizations: realizations.unwrap_or(d.realizations),
                coupling_time: coupling_time.unwrap_or(d.coupling_time),
                coupling_samples: coupling_samples.unwrap_or(d.coupling_samples),
                seed: ctx.seed(),
            };
            report(ctx, checks::graphical_suite(&p)?)
        }
        Command::TheoryCheck {
            lemma,
            laws,
            n,
            m,
            phi,
            epsilon,
            theta,
            walks,
            lambda,
            a,
            b,
            samples,
            alpha_minus,
            alpha_plus,
            level,
            sizes,
            horizon,
        } => {
            let seed = ctx.seed();
            let rows = match lemma {
                Lemma::Range => {
                    let d = checks::RangeParams::default();
                    checks::range_check(&checks::RangeParams {
                        n: n.unwrap_or(d.n),
                        phi: phi.unwrap_or(d.phi),
                        walks: walks.unwrap_or(d.walks),
                        seed,
                        ..d
                    })?
                }
                Lemma::Coupon => {
                    let d = checks::CouponParams::default();
                    checks::coupon_check(&checks::CouponParams {
                        n: n.unwrap_or(d.n),
                        m: m.unwrap_or(d.m),
                        epsilon: epsilon.unwrap_or(d.epsilon),
                        theta: theta.unwrap_or(d.theta),
                        walks: walks.unwrap_or(d.walks),
                        seed,
                    })?
                }
                Lemma::Drift => {
                    let d = checks::DriftParams::default();
                    let (rho_spec, xi_spec) = match (&laws.rho, &laws.xi, &ctx.config) {
                        (None, None, None) => (d.rho_spec.clone(), d.xi_spec.clone()),
                        _ => ctx.laws(&laws)?,
                    };
                    checks::drift_check(&checks::DriftParams {
                        rho_spec,
                        xi_spec,
                        n: n.unwrap_or(d.n),
                        lambda: lambda.unwrap_or(d.lambda),
                        a: a.unwrap_or(d.a),
                        b: b.unwrap_or(d.b),
                        samples: samples.unwrap_or(d.samples),
                        pairs: d.pairs,
                        seed,
                    })?
                }
                Lemma::Walk => {
                    let d = checks::WalkParams::default();
                    checks::walk_check(&checks::WalkParams {
                        alpha_minus: alpha_minus.unwrap_or(d.alpha_minus),
                        alpha_plus: alpha_plus.unwrap_or(d.alpha_plus),
                        level: level.unwrap_or(d.level),
                        sizes: sizes.unwrap_or(d.sizes),
                        horizon: horizon.unwrap_or(d.horizon),
                        walks: walks.unwrap_or(d.walks),
                        seed,
                    })?
                }
            };
            report(ctx, rows)
        }
        Command::Quasistationary { laws, n, lambda, t_burn, t_obs, replicas } => {
            let (rho, xi) = ctx.laws(&laws)?;
            let window = ctx.config.as_ref().and_then(|c| c.quasi).unwrap_or(QuasiWindow { t_burn: 20.0, t_obs: 30.0 });
            let window = QuasiWindow { t_burn: t_burn.unwrap_or(window.t_burn), t_obs: t_obs.unwrap_or(window.t_obs) };
            let n = ctx.n(n, 2000);
            let seed = ctx.seed();
            let env = Environment::sample(&rho, &xi, n, sweep::environment_seed(seed, n, 0), EnvMode::Stratified)?;
            let e_rho = rho.expectation(Transform::Identity)?;
            let r = quasi_stationary_estimate(&env, ctx.lambda(lambda, 2.0), e_rho, window, ctx.replicas(replicas, 20), seed)?;
            let mut w = ctx.writer()?;
            writeln!(w, "{}", serde_json::to_string_pretty(&r)?)?;
            Ok(true)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn meanfield(ctx: &Context, laws: &Laws, lambda: Option<f64>, f0: Option<f64>, t_end: f64, dt: f64, stride: usize) -> Outcome {
    let (rho, xi) = ctx.laws(laws)?;
    let lambda = ctx.lambda(lambda, 2.0);
    let solution = MeanFieldSolution::solve(lambda, &rho, &xi, DEFAULT_TOL)?;
    println!("{}", serde_json::to_string_pretty(&solution)?);
    if let Some(f0) = f0 {
        let profile = ClassProfile::from_spec(&xi)?;
        let init = vec![f0; profile.k()];
        let traj = integrate_mean_field_sampled(lambda, &profile, solution.e_rho, &init, dt, t_end, stride.max(1))?;
        let mut w = ctx.writer()?;
        write_trajectory_csv(&traj, &mut w)?;
        w.flush()?;
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    ctx: &Context,
    rho: &DistSpec,
    xi: &DistSpec,
    n: usize,
    lambda: f64,
    t_max: f64,
    replicas: usize,
    init: InitRule,
    mode: EnvMode,
    sample_every: Option<f64>,
    samples_out: Option<PathBuf>,
) -> Outcome {
    let master = ctx.seed();
    let env = Environment::sample(rho, xi, n, sweep::environment_seed(master, n, 0), mode)?;
    let start = init.vertices(n);
    let runs = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let seed = replica_seed(master, n, lambda, 0, r);
            dynamics::run(&env, lambda, &start, t_max, seed, sample_every).map(|o| (r, o))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<SweepRow> = runs
        .iter()
        .map(|(r, o)| SweepRow {
            n,
            lambda,
            env_seed: env.env_seed(),
            replica: *r,
            seed: o.replica_seed,
            extinction_time: o.extinction_time,
            capped_at: o.capped_at,
            event_count: o.event_count,
            final_count: o.final_count,
        })
        .collect();
    let mut w = ctx.writer()?;
    sweep::write_simulate_csv(&rows, &mut w)?;
    w.flush()?;
    if let (Some(path), Some(_)) = (samples_out, sample_every) {
        let k = env.classes().map_or(0, |c| c.profile.k());
        let samples: Vec<_> = runs.into_iter().map(|(r, o)| (r, o.samples)).collect();
        let mut w = open(Some(&path))?;
        sweep::write_samples_csv(&samples, k, &mut w)?;
        w.flush()?;
    }
    Ok(true)
}

fn report(ctx: &Context, rows: Vec<CheckRow>) -> Outcome {
    eprint!("{}", checks::format_rows(&rows));
    if let Some(path) = &ctx.out {
        let mut w = open(Some(path))?;
        checks::write_check_csv(&rows, &mut w)?;
        w.flush()?;
    } else {
        checks::write_check_csv(&rows, io::stdout().lock())?;
    }
    Ok(checks::all_pass(&rows))
}
