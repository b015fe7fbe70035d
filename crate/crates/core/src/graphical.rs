//! Graphical representation of the contact process.
//!
//! Each vertex `i` carries a Poisson process of recovery marks at rate
//! `ξ(i)`; each ordered pair `(i,j)` carries an independent Poisson process
//! of arrows `i → j` at rate `(λ/n) ρ(i,j)`. Vertex `j` is infected at time
//! `t` from initial set `A` iff an infection path joins some `(i,0)`, `i ∈ A`,
//! to `(j,t)`: a path moves up in time without crossing a recovery mark and
//! jumps along arrows.
//!
//! Events are kept in one chronological timeline. Equal timestamps (a
//! probability-zero event) are ordered recovery mark first, then arrow, then
//! by vertex index.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::env::Environment;
use crate::seed::{exponential, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum GraphicalError {
    #[error("query time {t} beyond horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("event time outside [0, horizon]")]
    EventTime,
    #[error("arrow endpoints must differ")]
    SelfArrow,
    #[error("horizon must be finite and non-negative")]
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    /// Recovery mark on a vertex.
    Recovery { vertex: usize },
    /// Infection arrow `from → to`.
    Arrow { from: usize, to: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    fn order_key(&self) -> (u8, usize, usize) {
        match self.kind {
            EventKind::Recovery { vertex } => (0, vertex, 0),
            EventKind::Arrow { from, to } => (1, from, to),
        }
    }

    fn chronological(a: &Event, b: &Event) -> Ordering {
        a.time.total_cmp(&b.time).then_with(|| a.order_key().cmp(&b.order_key()))
    }
}

/// One sample of all recovery marks and arrows on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphicalRealization {
    n: usize,
    horizon: f64,
    recovery_marks: Vec<Vec<f64>>,
    timeline: Vec<Event>,
}

impl GraphicalRealization {
    /// Samples every process independently; deterministic in `seed`.
    pub fn sample(env: &Environment, lambda: f64, horizon: f64, seed: u64) -> Result<Self, GraphicalError> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(GraphicalError::Horizon);
        }
        let n = env.n();
        let mut rng = rng_from_seed(seed);
        let mut recovery_marks = Vec::with_capacity(n);
        let mut timeline = Vec::new();
        for (vertex, &rate) in env.xi().iter().enumerate() {
            let marks = poisson_times(&mut rng, rate, horizon);
            timeline.extend(marks.iter().map(|&time| Event { time, kind: EventKind::Recovery { vertex } }));
            recovery_marks.push(marks);
        }
        let scale = lambda / n as f64;
        for from in 0..n {
            for to in (0..n).filter(|&to| to != from) {
                let rate = scale * env.weight(from, to);
                for time in poisson_times(&mut rng, rate, horizon) {
                    timeline.push(Event { time, kind: EventKind::Arrow { from, to } });
                }
            }
        }
        timeline.sort_by(Event::chronological);
        Ok(Self { n, horizon, recovery_marks, timeline })
    }

    /// Builds a realization from explicit marks `(vertex, time)` and arrows
    /// `(time, from, to)`.
    pub fn from_events(
        n: usize,
        horizon: f64,
        marks: &[(usize, f64)],
        arrows: &[(f64, usize, usize)],
    ) -> Result<Self, GraphicalError> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(GraphicalError::Horizon);
        }
        let in_window = |t: f64| (0.0..=horizon).contains(&t);
        let mut recovery_marks = vec![Vec::new(); n];
        let mut timeline = Vec::with_capacity(marks.len() + arrows.len());
        for &(vertex, time) in marks {
            if vertex >= n {
                return Err(GraphicalError::VertexOutOfRange(vertex));
            }
            if !in_window(time) {
                return Err(GraphicalError::EventTime);
            }
            recovery_marks[vertex].push(time);
            timeline.push(Event { time, kind: EventKind::Recovery { vertex } });
        }
        for &(time, from, to) in arrows {
            if from >= n || to >= n {
                return Err(GraphicalError::VertexOutOfRange(from.max(to)));
            }
            if from == to {
                return Err(GraphicalError::SelfArrow);
            }
            if !in_window(time) {
                return Err(GraphicalError::EventTime);
            }
            timeline.push(Event { time, kind: EventKind::Arrow { from, to } });
        }
        for m in &mut recovery_marks {
            m.sort_by(f64::total_cmp);
        }
        timeline.sort_by(Event::chronological);
        Ok(Self { n, horizon, recovery_marks, timeline })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn recovery_marks(&self, vertex: usize) -> &[f64] {
        &self.recovery_marks[vertex]
    }

    pub fn timeline(&self) -> &[Event] {
        &self.timeline
    }

    /// Arrows as `(time, from, to)` in chronological order.
    pub fn arrows(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        self.timeline.iter().filter_map(|e| match e.kind {
            EventKind::Arrow { from, to } => Some((e.time, from, to)),
            EventKind::Recovery { .. } => None,
        })
    }

    /// The same realization restricted to `[0, t]`.
    pub fn truncated(&self, t: f64) -> Result<Self, GraphicalError> {
        self.check_time(t)?;
        Ok(Self {
            n: self.n,
            horizon: t,
            recovery_marks: self
                .recovery_marks
                .iter()
                .map(|m| m.iter().copied().filter(|&s| s <= t).collect())
                .collect(),
            timeline: self.timeline.iter().copied().filter(|e| e.time <= t).collect(),
        })
    }

    fn check_time(&self, t: f64) -> Result<(), GraphicalError> {
        if t > self.horizon || !(t >= 0.0) {
            return Err(GraphicalError::BeyondHorizon { t, horizon: self.horizon });
        }
        Ok(())
    }

    fn check_set(&self, set: &[usize]) -> Result<(), GraphicalError> {
        match set.iter().find(|&&v| v >= self.n) {
            Some(&v) => Err(GraphicalError::VertexOutOfRange(v)),
            None => Ok(()),
        }
    }

    /// `η_t^A`: the vertices reachable at time `t` by an infection path
    /// from `A × {0}`, sorted ascending.
    ///
    /// One chronological sweep keeps the live set: a mark at `(i,s)`
    /// removes `i`, an arrow `i → j` at `s` adds `j` if `i` is live. Marks
    /// at exactly `t` apply; arrows at exactly `t` do not.
    pub fn evolve(&self, init: &[usize], t: f64) -> Result<Vec<usize>, GraphicalError> {
        self.check_time(t)?;
        self.check_set(init)?;
        let mut live = vec![false; self.n];
        for &v in init {
            live[v] = true;
        }
        for event in &self.timeline {
            if event.time > t {
                break;
            }
            match event.kind {
                EventKind::Recovery { vertex } => live[vertex] = false,
                EventKind::Arrow { from, to } => {
                    if event.time < t && live[from] {
                        live[to] = true;
                    }
                }
            }
        }
        Ok(live.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    /// Whether an infection path joins `(i,0)` to `(j,t)`.
    ///
    /// Computed by the dual backward sweep from `(j,t)`: walking down in
    /// time, an arrow `a → b` adds `a` when `b` is in the set and a mark on
    /// `a` removes it. The sweep is independent of [`Self::evolve`].
    pub fn infection_path_exists(&self, i: usize, j: usize, t: f64) -> Result<bool, GraphicalError> {
        self.check_time(t)?;
        self.check_set(&[i, j])?;
        let mut reach = vec![false; self.n];
        reach[j] = true;
        let end = self.timeline.partition_point(|e| e.time <= t);
        for event in self.timeline[..end].iter().rev() {
            match event.kind {
                EventKind::Arrow { from, to } => {
                    if event.time < t && reach[to] {
                        reach[from] = true;
                    }
                }
                EventKind::Recovery { vertex } => reach[vertex] = false,
            }
        }
        Ok(reach[i])
    }

    /// Additivity `η_t^A = ∪_{i∈A} η_t^{i}` on this realization, exact.
    pub fn check_additivity(&self, init: &[usize], t: f64) -> Result<bool, GraphicalError> {
        let joint = self.evolve(init, t)?;
        let mut union = vec![false; self.n];
        for &i in init {
            for v in self.evolve(&[i], t)? {
                union[v] = true;
            }
        }
        let union: Vec<usize> = union.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        Ok(joint == union)
    }
}

/// Event times of a homogeneous Poisson process on `[0, horizon]`.
fn poisson_times<R: Rng + ?Sized>(rng: &mut R, rate: f64, horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(rate > 0.0) || horizon <= 0.0 {
        return out;
    }
    let mut t = exponential(rng, rate);
    while t <= horizon {
        out.push(t);
        t += exponential(rng, rate);
    }
    out
}
