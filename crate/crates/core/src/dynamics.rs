//! Exact event-driven simulation of the contact process.
//!
//! Vertex `i` flips at rate
//!
//! ```text
//! c(η, i) = ξ(i)                              if η(i) = 1
//!         = (λ/n) Σ_{j≠i} ρ(i,j) η(j)         if η(i) = 0
//! ```
//!
//! The simulator keeps each vertex's infection pressure
//! `(λ/n) Σ_{j≠i} ρ(i,j) η(j)` and the current rates in a [`RateTree`].
//! A flip of `v` shifts the pressure of every other vertex by
//! `±(λ/n) ρ(v,j)`, so each event costs `O(n)`; the next vertex is found by
//! prefix-sum search in `O(log n)`. Pressures are recomputed from scratch
//! every [`REBUILD_INTERVAL`] events and whenever the process dies out.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::env::{ClassProfile, Environment};
use crate::rate_tree::RateTree;
use crate::seed::{exponential, open_unit, rng_from_seed};

/// Events between exact rebuilds of the pressure table.
pub const REBUILD_INTERVAL: u32 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum DynamicsError {
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("vertex {0} listed twice in the initial set")]
    DuplicateVertex(usize),
    #[error("horizon must be positive")]
    Horizon,
    #[error("sampling interval must be positive")]
    SampleInterval,
    #[error("recovery rate of vertex {vertex} is not a class rate of the profile")]
    RateNotInProfile { vertex: usize },
    #[error("region needs 0 < a < b")]
    RegionBounds,
}

/// Infection state `η` with its infected count and per-class counts `A(j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    infected: Vec<bool>,
    count: usize,
    class_counts: Vec<usize>,
}

impl Configuration {
    pub fn new(env: &Environment, init: &[usize]) -> Result<Self, DynamicsError> {
        let n = env.n();
        let k = env.classes().map_or(0, |c| c.profile.k());
        let mut config = Self { infected: vec![false; n], count: 0, class_counts: vec![0; k] };
        for &v in init {
            if v >= n {
                return Err(DynamicsError::VertexOutOfRange { vertex: v, n });
            }
            if config.infected[v] {
                return Err(DynamicsError::DuplicateVertex(v));
            }
            config.toggle(env, v);
        }
        Ok(config)
    }

    pub fn full(env: &Environment) -> Self {
        let all: Vec<usize> = (0..env.n()).collect();
        Self::new(env, &all).expect("all vertices are in range")
    }

    #[inline]
    fn toggle(&mut self, env: &Environment, v: usize) {
        let now = !self.infected[v];
        self.infected[v] = now;
        let label = env.classes().map(|c| c.label[v] as usize);
        let slot = label.and_then(|c| self.class_counts.get_mut(c));
        if now {
            self.count += 1;
            if let Some(a) = slot {
                *a += 1;
            }
        } else {
            self.count -= 1;
            if let Some(a) = slot {
                *a -= 1;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.infected.len()
    }

    #[inline]
    pub fn is_infected(&self, i: usize) -> bool {
        self.infected[i]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `A(j)` for each class of the environment (empty without classes).
    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn infected_vertices(&self) -> Vec<usize> {
        self.infected.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn as_flags(&self) -> &[bool] {
        &self.infected
    }
}

/// Exact flip rate of vertex `i`, evaluated directly from its definition.
pub fn vertex_rate(env: &Environment, config: &Configuration, lambda: f64, i: usize) -> f64 {
    if config.is_infected(i) {
        return env.xi()[i];
    }
    let mut sum = 0.0;
    env.for_each_neighbor(i, |j, w| {
        if config.is_infected(j) {
            sum += w;
        }
    });
    lambda / env.n() as f64 * sum
}

/// Per-vertex rates with a cumulative structure for sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    pressure: Vec<f64>,
    rates: Vec<f64>,
    tree: RateTree,
    scale: f64,
}

impl RateTable {
    pub fn new(env: &Environment, config: &Configuration, lambda: f64) -> Self {
        let n = env.n();
        let mut table = Self {
            pressure: vec![0.0; n],
            rates: vec![0.0; n],
            tree: RateTree::new(n),
            scale: lambda / n as f64,
        };
        table.rebuild(env, config);
        table
    }

    /// Recomputes every pressure and rate exactly.
    pub fn rebuild(&mut self, env: &Environment, config: &Configuration) {
        self.pressure.fill(0.0);
        for i in (0..env.n()).filter(|&i| config.is_infected(i)) {
            let pressure = &mut self.pressure;
            env.for_each_neighbor(i, |j, w| pressure[j] += w);
        }
        for (j, p) in self.pressure.iter_mut().enumerate() {
            *p *= self.scale;
            self.rates[j] = if config.is_infected(j) { env.xi()[j] } else { *p };
        }
        self.tree.rebuild(&self.rates);
    }

    /// Updates after `v` has flipped; `config` is the post-flip state.
    fn apply_flip(&mut self, env: &Environment, config: &Configuration, v: usize) {
        if config.is_empty() {
            self.pressure.fill(0.0);
            for (j, r) in self.rates.iter_mut().enumerate() {
                *r = if config.is_infected(j) { env.xi()[j] } else { 0.0 };
            }
        } else {
            let delta = if config.is_infected(v) { self.scale } else { -self.scale };
            let (pressure, rates, flags) = (&mut self.pressure, &mut self.rates, config.as_flags());
            env.for_each_neighbor(v, |j, w| {
                let p = pressure[j] + delta * w;
                pressure[j] = p;
                if !flags[j] {
                    rates[j] = p.max(0.0);
                }
            });
            self.rates[v] = if config.is_infected(v) { env.xi()[v] } else { self.pressure[v].max(0.0) };
        }
        self.tree.rebuild(&self.rates);
    }

    #[inline]
    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn total(&self) -> f64 {
        self.tree.total()
    }

    /// Largest absolute gap between the table and a direct evaluation.
    pub fn max_deviation(&self, env: &Environment, config: &Configuration, lambda: f64) -> f64 {
        (0..env.n())
            .map(|i| (self.rates[i] - vertex_rate(env, config, lambda, i)).abs())
            .fold(0.0, f64::max)
    }

    fn pick(&self, target: f64) -> usize {
        let n = self.rates.len();
        let idx = self.tree.search(target);
        if idx < n && self.rates[idx] > 0.0 {
            return idx;
        }
        // Rounding pushed the target past the last positive entry.
        (0..idx.min(n)).rev().find(|&i| self.rates[i] > 0.0).unwrap_or(n - 1)
    }
}

/// Result of one attempted transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepResult {
    Flipped { dt: f64, vertex: usize, infected: bool },
    /// No infected vertex remains; time does not advance.
    Extinct,
    /// The next event would fall after the horizon; time is set to it.
    Horizon,
}

/// A running contact process on a fixed environment.
#[derive(Clone, Debug)]
pub struct ContactProcess<'e> {
    env: &'e Environment,
    lambda: f64,
    config: Configuration,
    table: RateTable,
    time: f64,
    events: u64,
    since_rebuild: u32,
}

impl<'e> ContactProcess<'e> {
    pub fn new(env: &'e Environment, lambda: f64, init: &[usize]) -> Result<Self, DynamicsError> {
        let config = Configuration::new(env, init)?;
        Ok(Self::from_config(env, lambda, config))
    }

    pub fn from_config(env: &'e Environment, lambda: f64, config: Configuration) -> Self {
        let table = RateTable::new(env, &config, lambda);
        Self { env, lambda, config, table, time: 0.0, events: 0, since_rebuild: 0 }
    }

    pub fn env(&self) -> &'e Environment {
        self.env
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn table(&self) -> &RateTable {
        &self.table
    }

    /// Flips `v` without advancing time.
    pub fn flip(&mut self, v: usize) {
        self.config.toggle(self.env, v);
        self.table.apply_flip(self.env, &self.config, v);
        self.events += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.table.rebuild(self.env, &self.config);
            self.since_rebuild = 0;
        }
    }

    /// One transition with no horizon.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepResult {
        self.advance(f64::INFINITY, rng, |_, _, _| {})
    }

    /// One transition, refusing events after `horizon`.
    pub fn step_until<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> StepResult {
        self.advance(horizon, rng, |_, _, _| {})
    }

    /// One transition, first reporting the holding interval `[from, to)` of
    /// the current configuration to `hold`. `to` is the event time, or the
    /// horizon if the event falls after it.
    pub fn advance<R, F>(&mut self, horizon: f64, rng: &mut R, mut hold: F) -> StepResult
    where
        R: Rng + ?Sized,
        F: FnMut(f64, f64, &Configuration),
    {
        if self.config.is_empty() {
            return StepResult::Extinct;
        }
        let total = self.table.total();
        let dt = exponential(rng, total);
        let at = self.time + dt;
        if at > horizon {
            hold(self.time, horizon, &self.config);
            self.time = horizon;
            return StepResult::Horizon;
        }
        let vertex = self.table.pick(total * open_unit(rng));
        hold(self.time, at, &self.config);
        self.time = at;
        self.flip(vertex);
        StepResult::Flipped { dt, vertex, infected: self.config.is_infected(vertex) }
    }
}

/// Snapshot of the counts at one sampling time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub count: usize,
    pub class_counts: Vec<usize>,
}

/// Summary of one replica.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    /// Time of the recovery that emptied the configuration.
    pub extinction_time: Option<f64>,
    /// The horizon, when the process was still alive there.
    pub capped_at: Option<f64>,
    pub samples: Vec<Sample>,
    pub event_count: u64,
    pub replica_seed: u64,
    pub final_count: usize,
}

/// Runs `η^A` from `init` until extinction or `t_max`.
///
/// With `sample_every = Some(s)` the counts are recorded at `t = 0, s, 2s, …`
/// up to the end of the run, plus one final sample at the extinction time.
pub fn run(
    env: &Environment,
    lambda: f64,
    init: &[usize],
    t_max: f64,
    replica_seed: u64,
    sample_every: Option<f64>,
) -> Result<Outcome, DynamicsError> {
    if !(t_max > 0.0) {
        return Err(DynamicsError::Horizon);
    }
    if let Some(s) = sample_every {
        if !(s > 0.0) || !s.is_finite() {
            return Err(DynamicsError::SampleInterval);
        }
    }
    let mut rng = rng_from_seed(replica_seed);
    let mut process = ContactProcess::new(env, lambda, init)?;
    let mut samples = Vec::new();
    let mut next_index = 0u64;
    let mut record = |from: f64, to: f64, config: &Configuration, inclusive: bool| {
        if let Some(s) = sample_every {
            loop {
                let g = next_index as f64 * s;
                if g < from || !(g < to || (inclusive && g <= to)) {
                    break;
                }
                samples.push(Sample { t: g, count: config.count(), class_counts: config.class_counts().to_vec() });
                next_index += 1;
            }
        }
    };

    let outcome = loop {
        match process.advance(t_max, &mut rng, |a, b, c| record(a, b, c, false)) {
            StepResult::Flipped { .. } => {}
            StepResult::Extinct => break Ok(process.time()),
            StepResult::Horizon => break Err(t_max),
        }
    };
    match outcome {
        Ok(t) => {
            record(t, t, process.config(), true);
            if sample_every.is_some() && samples.last().is_none_or(|s| s.t < t) {
                let k = process.config().class_counts().len();
                samples.push(Sample { t, count: 0, class_counts: vec![0; k] });
            }
        }
        Err(t) => record(t, t, process.config(), true),
    }
    Ok(Outcome {
        extinction_time: outcome.ok(),
        capped_at: outcome.err(),
        samples,
        event_count: process.events(),
        replica_seed,
        final_count: process.config().count(),
    })
}

/// Counts `A(j)` of infected vertices with recovery rate `y_j`.
pub fn class_counts(
    env: &Environment,
    config: &Configuration,
    profile: &ClassProfile,
) -> Result<Vec<usize>, DynamicsError> {
    let mut counts = vec![0; profile.k()];
    for (v, &rate) in env.xi().iter().enumerate() {
        let class = profile.class_of(rate).ok_or(DynamicsError::RateNotInProfile { vertex: v })?;
        if config.is_infected(v) {
            counts[class] += 1;
        }
    }
    Ok(counts)
}

/// `λaEρ / (y + λaEρ)`: the class-`y` proportion at level `a`.
#[inline]
pub fn level_proportion(y: f64, lambda: f64, a: f64, e_rho: f64) -> f64 {
    let s = lambda * a * e_rho;
    s / (y + s)
}

/// Membership of class counts in the box `B_n(a,b)` (with `b`) or the upper
/// set `Ũ_n(a)` (without): for every class,
/// `level(a) · q_i n ≤ A(i) [≤ level(b) · q_i n]`.
pub fn in_region(
    counts: &[usize],
    profile: &ClassProfile,
    n: usize,
    lambda: f64,
    e_rho: f64,
    a: f64,
    b: Option<f64>,
) -> Result<bool, DynamicsError> {
    if !(a > 0.0) || b.is_some_and(|b| !(b > a)) {
        return Err(DynamicsError::RegionBounds);
    }
    let size = n as f64;
    Ok(profile.rates().iter().zip(profile.probs()).zip(counts).all(|((&y, &q), &count)| {
        let count = count as f64;
        let lower = level_proportion(y, lambda, a, e_rho) * q * size;
        let upper = b.map_or(f64::INFINITY, |b| level_proportion(y, lambda, b, e_rho) * q * size);
        lower <= count && count <= upper
    }))
}

/// `g(a)`: the componentwise smallest integer point of `U_n(a)`.
pub fn minimal_point(profile: &ClassProfile, n: usize, lambda: f64, e_rho: f64, a: f64) -> Vec<usize> {
    profile
        .rates()
        .iter()
        .zip(profile.probs())
        .map(|(&y, &q)| libm::ceil(level_proportion(y, lambda, a, e_rho) * q * n as f64) as usize)
        .collect()
}
