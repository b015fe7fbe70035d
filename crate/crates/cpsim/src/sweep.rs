//! λ × n sweeps over environments and replicas.

use std::io::{self, Write};
use std::path::Path;

use cpsim_core::dynamics::{self, DynamicsError};
use cpsim_core::env::{EnvError, Environment};
use cpsim_core::seed::{derive_seed_path, Stream};
use cpsim_core::Sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ExperimentConfig;

pub const SCHEMA_LINE: &str = "# cpsim-schema v1";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("environment for n = {n}: {source}")]
    Environment { n: usize, source: EnvError },
    #[error("n = {n}, λ = {lambda}: {source}")]
    Dynamics { n: usize, lambda: f64, source: DynamicsError },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

/// One replica of one `(n, λ, environment)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub lambda: f64,
    pub env_seed: u64,
    pub replica: usize,
    pub seed: u64,
    pub extinction_time: Option<f64>,
    pub capped_at: Option<f64>,
    pub event_count: u64,
    pub final_count: usize,
}

/// Seed of the environment with index `env_index` at size `n`.
pub fn environment_seed(master: u64, n: usize, env_index: usize) -> u64 {
    derive_seed_path(master, Stream::Environment, &[n as u64, env_index as u64])
}

/// Seed of one replica; independent of the rest of the grid.
pub fn replica_seed(master: u64, n: usize, lambda: f64, env_index: usize, replica: usize) -> u64 {
    derive_seed_path(master, Stream::Dynamics, &[n as u64, lambda.to_bits(), env_index as u64, replica as u64])
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SweepError> {
    match threads {
        Some(k) => Ok(rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build()?.install(f)),
        None => Ok(f()),
    }
}

/// Samples every environment of the grid, indexed `[n][env_index]`.
pub fn environments(config: &ExperimentConfig) -> Result<Vec<Vec<Environment>>, SweepError> {
    config
        .n_grid
        .iter()
        .map(|&n| {
            (0..config.environments)
                .into_par_iter()
                .map(|e| {
                    let seed = environment_seed(config.master_seed, n, e);
                    Environment::sample(&config.rho_spec, &config.xi_spec, n, seed, config.env_mode)
                        .map_err(|source| SweepError::Environment { n, source })
                })
                .collect()
        })
        .collect()
}

/// Runs every `(n, λ, environment, replica)` cell. Rows come back sorted
/// by `(n, λ, environment, replica)` whatever the thread count.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, SweepError> {
    let envs = environments(config)?;
    let cells: Vec<(usize, usize, usize, usize)> = (0..config.n_grid.len())
        .flat_map(|ni| {
            (0..config.lambda_grid.len()).flat_map(move |li| {
                (0..config.environments).flat_map(move |e| (0..config.replicas).map(move |r| (ni, li, e, r)))
            })
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(ni, li, e, r)| {
            let env = &envs[ni][e];
            let (n, lambda) = (config.n_grid[ni], config.lambda_grid[li]);
            let seed = replica_seed(config.master_seed, n, lambda, e, r);
            let out = dynamics::run(env, lambda, &config.init.vertices(n), config.t_max_rule.t_max(n), seed, None)
                .map_err(|source| SweepError::Dynamics { n, lambda, source })?;
            Ok(SweepRow {
                n,
                lambda,
                env_seed: env.env_seed(),
                replica: r,
                seed,
                extinction_time: out.extinction_time,
                capped_at: out.capped_at,
                event_count: out.event_count,
                final_count: out.final_count,
            })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn csv_error(path: &str) -> impl Fn(csv::Error) -> SweepError + '_ {
    move |e| SweepError::Io { path: path.to_owned(), source: e.into() }
}

/// Writes sweep rows as CSV after the schema comment line.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), csv::Error> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "lambda",
        "env_seed",
        "replica",
        "seed",
        "extinction_time",
        "capped_at",
        "event_count",
        "final_count",
    ])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.lambda.to_string(),
            r.env_seed.to_string(),
            r.replica.to_string(),
            r.seed.to_string(),
            opt(r.extinction_time),
            opt(r.capped_at),
            r.event_count.to_string(),
            r.final_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

pub fn save_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), SweepError> {
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| SweepError::Io { path: name.clone(), source })?;
    write_sweep_csv(rows, io::BufWriter::new(file)).map_err(csv_error(&name))
}

/// Reads a file written by [`write_sweep_csv`].
pub fn load_sweep_csv(path: &Path) -> Result<Vec<SweepRow>, SweepError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io { path: name.clone(), source })?;
    let body = text.strip_prefix(SCHEMA_LINE).ok_or_else(|| SweepError::Parse {
        path: name.clone(),
        message: format!("missing `{SCHEMA_LINE}` header"),
    })?;
    let mut reader = csv::Reader::from_reader(body.trim_start().as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| SweepError::Parse { path: name.clone(), message: format!("row {}: {e}", i + 1) })
        })
        .collect()
}

/// Writes per-replica results of a single cell.
pub fn write_simulate_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), csv::Error> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replica", "seed", "extinction_time", "capped_at", "event_count", "final_count"])?;
    for r in rows {
        w.write_record([
            r.replica.to_string(),
            r.seed.to_string(),
            opt(r.extinction_time),
            opt(r.capped_at),
            r.event_count.to_string(),
            r.final_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes sampled trajectories: `replica, t, count, A_1, …, A_k`.
pub fn write_samples_csv<W: Write>(runs: &[(usize, Vec<Sample>)], k: usize, mut out: W) -> Result<(), csv::Error> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replica".to_owned(), "t".to_owned(), "count".to_owned()];
    header.extend((1..=k).map(|i| format!("A_{i}")));
    w.write_record(&header)?;
    for (replica, samples) in runs {
        for s in samples {
            let mut rec = vec![replica.to_string(), s.t.to_string(), s.count.to_string()];
            rec.extend(s.class_counts.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
