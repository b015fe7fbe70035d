//! Random environments: laws of the edge weight `ρ` and the recovery rate
//! `ξ`, their moments, and quenched samples `(ξ(i), ρ(i,j))` on `C_n`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{open_unit, rng_from_seed};

/// Tolerance on `Σ probs = 1`.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    Constant,
    TwoPoint,
    FiniteDiscrete,
    /// Uniform on the half-open interval `(lo, hi]`.
    UniformInterval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    EdgeWeight,
    RecoveryRate,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::EdgeWeight => "edge-weight",
            Role::RecoveryRate => "recovery-rate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("`{0}` has the wrong number of entries")]
    WrongLength(&'static str),
    #[error("non-finite value")]
    NonFinite,
    #[error("negative probability")]
    NegativeProb,
    #[error("probs sum ≠ 1")]
    ProbsSum,
    #[error("values not distinct")]
    DuplicateValue,
    #[error("empty interval: need lo < hi")]
    EmptyInterval,
    #[error("edge-weight support outside [0,1]")]
    EdgeWeightRange,
    #[error("P(ρ>0)=0")]
    NoPositiveWeight,
    #[error("recovery-rate bound M must lie in (1,∞)")]
    InvalidBound,
    #[error("recovery-rate support outside [1,M]")]
    RecoveryRange,
    #[error("transform requires a recovery-rate law")]
    TransformRole,
    #[error("law has no finite support")]
    NotFinite,
    #[error("discretization level must be positive")]
    ZeroLevel,
    #[error("operation expects a {0} law")]
    WrongRole(Role),
}

/// A finitely described probability law for `ρ` or `ξ`.
///
/// Finite kinds list atoms in `values` with masses in `probs` (a constant
/// may omit `probs`). The uniform kind uses `lo` and `hi`. Recovery-rate
/// laws may declare the bound `M` as `bound`; without it the support
/// maximum is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub kind: DistKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

/// Function whose expectation [`DistSpec::expectation`] computes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    Identity,
    Reciprocal,
    /// `v ↦ λEρ / (v + λ x Eρ)`, the integrand of `h(x)`.
    Resolvent { x: f64, lambda: f64, e_rho: f64 },
}

impl DistSpec {
    pub fn constant(value: f64, role: Role) -> Self {
        Self {
            kind: DistKind::Constant,
            values: vec![value],
            probs: Vec::new(),
            lo: None,
            hi: None,
            role,
            bound: None,
        }
    }

    pub fn two_point(values: [f64; 2], probs: [f64; 2], role: Role) -> Self {
        Self {
            kind: DistKind::TwoPoint,
            values: values.to_vec(),
            probs: probs.to_vec(),
            lo: None,
            hi: None,
            role,
            bound: None,
        }
    }

    pub fn finite(values: Vec<f64>, probs: Vec<f64>, role: Role) -> Self {
        Self {
            kind: DistKind::FiniteDiscrete,
            values,
            probs,
            lo: None,
            hi: None,
            role,
            bound: None,
        }
    }

    pub fn uniform(lo: f64, hi: f64, role: Role) -> Self {
        Self {
            kind: DistKind::UniformInterval,
            values: Vec::new(),
            probs: Vec::new(),
            lo: Some(lo),
            hi: Some(hi),
            role,
            bound: None,
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.kind != DistKind::UniformInterval
    }

    /// Checks every invariant, reporting the first one violated.
    pub fn validate(&self) -> Result<(), SpecError> {
        match self.kind {
            DistKind::UniformInterval => self.validate_uniform(),
            _ => self.validate_finite(),
        }
    }

    fn validate_finite(&self) -> Result<(), SpecError> {
        if self.values.is_empty() {
            return Err(SpecError::MissingField("values"));
        }
        match self.kind {
            DistKind::Constant if self.values.len() != 1 => return Err(SpecError::WrongLength("values")),
            DistKind::TwoPoint if self.values.len() != 2 => return Err(SpecError::WrongLength("values")),
            _ => {}
        }
        let implicit_unit = self.kind == DistKind::Constant && self.probs.is_empty();
        if !implicit_unit && self.probs.len() != self.values.len() {
            return Err(SpecError::WrongLength("probs"));
        }
        if self.values.iter().chain(&self.probs).any(|v| !v.is_finite()) {
            return Err(SpecError::NonFinite);
        }
        if self.probs.iter().any(|&p| p < 0.0) {
            return Err(SpecError::NegativeProb);
        }
        if !implicit_unit {
            let total: f64 = self.probs.iter().sum();
            if (total - 1.0).abs() > PROB_SUM_TOL {
                return Err(SpecError::ProbsSum);
            }
        }
        for (i, a) in self.values.iter().enumerate() {
            if self.values[i + 1..].contains(a) {
                return Err(SpecError::DuplicateValue);
            }
        }
        let (min, max) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        match self.role {
            Role::EdgeWeight => {
                if min < 0.0 || max > 1.0 {
                    return Err(SpecError::EdgeWeightRange);
                }
                let positive_mass: f64 = self.atoms().filter(|&(v, _)| v > 0.0).map(|(_, p)| p).sum();
                if positive_mass <= 0.0 {
                    return Err(SpecError::NoPositiveWeight);
                }
            }
            Role::RecoveryRate => self.check_recovery_support(min, max)?,
        }
        Ok(())
    }

    fn validate_uniform(&self) -> Result<(), SpecError> {
        let lo = self.lo.ok_or(SpecError::MissingField("lo"))?;
        let hi = self.hi.ok_or(SpecError::MissingField("hi"))?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(SpecError::NonFinite);
        }
        if lo >= hi {
            return Err(SpecError::EmptyInterval);
        }
        match self.role {
            Role::EdgeWeight if lo < 0.0 || hi > 1.0 => Err(SpecError::EdgeWeightRange),
            Role::EdgeWeight => Ok(()),
            Role::RecoveryRate => self.check_recovery_support(lo, hi),
        }
    }

    fn check_recovery_support(&self, min: f64, max: f64) -> Result<(), SpecError> {
        if let Some(m) = self.bound {
            if !(m > 1.0 && m.is_finite()) {
                return Err(SpecError::InvalidBound);
            }
            if max > m {
                return Err(SpecError::RecoveryRange);
            }
        }
        if min < 1.0 {
            return Err(SpecError::RecoveryRange);
        }
        Ok(())
    }

    /// `(value, mass)` pairs of a finite law. Empty for the uniform kind.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let unit = self.kind == DistKind::Constant && self.probs.is_empty();
        let finite = self.is_finite();
        self.values
            .iter()
            .enumerate()
            .filter(move |_| finite)
            .map(move |(i, &v)| (v, if unit { 1.0 } else { self.probs[i] }))
    }

    /// The declared bound `M`, or the support maximum for a recovery law.
    pub fn upper_bound(&self) -> f64 {
        if let Some(m) = self.bound {
            return m;
        }
        match self.kind {
            DistKind::UniformInterval => self.hi.unwrap_or(f64::NAN),
            _ => self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Exact expectation of `transform(value)`.
    pub fn expectation(&self, transform: Transform) -> Result<f64, SpecError> {
        self.validate()?;
        if !matches!(transform, Transform::Identity) && self.role != Role::RecoveryRate {
            return Err(SpecError::TransformRole);
        }
        Ok(match self.kind {
            DistKind::UniformInterval => {
                let (lo, hi) = (self.lo.unwrap_or_default(), self.hi.unwrap_or_default());
                let width = hi - lo;
                match transform {
                    Transform::Identity => 0.5 * (lo + hi),
                    Transform::Reciprocal => libm::log(hi / lo) / width,
                    Transform::Resolvent { x, lambda, e_rho } => {
                        let c = lambda * e_rho;
                        let shift = c * x;
                        c * libm::log((hi + shift) / (lo + shift)) / width
                    }
                }
            }
            _ => self.atoms().map(|(v, p)| p * apply(transform, v)).sum(),
        })
    }

    /// Push-forward under `v ↦ ⌈v m⌉ / m`.
    ///
    /// Products `v·m` within `1e-9` (relative) of an integer are treated as
    /// that integer, so laws already on the grid come back unchanged.
    pub fn discretize(&self, m: u32) -> Result<DistSpec, SpecError> {
        self.validate()?;
        if self.role != Role::RecoveryRate {
            return Err(SpecError::WrongRole(Role::RecoveryRate));
        }
        if m == 0 {
            return Err(SpecError::ZeroLevel);
        }
        let level = f64::from(m);
        let mut atoms: Vec<(i64, f64)> = Vec::new();
        match self.kind {
            DistKind::UniformInterval => {
                let (lo, hi) = (self.lo.unwrap_or_default(), self.hi.unwrap_or_default());
                let first = grid_floor(lo * level) + 1;
                let last = grid_ceil(hi * level);
                for k in first..=last {
                    let cell_lo = ((k - 1) as f64 / level).max(lo);
                    let cell_hi = (k as f64 / level).min(hi);
                    if cell_hi > cell_lo {
                        atoms.push((k, (cell_hi - cell_lo) / (hi - lo)));
                    }
                }
            }
            _ => {
                for (v, p) in self.atoms() {
                    let k = grid_ceil(v * level);
                    match atoms.iter_mut().find(|(j, _)| *j == k) {
                        Some(entry) => entry.1 += p,
                        None => atoms.push((k, p)),
                    }
                }
                atoms.sort_by_key(|&(k, _)| k);
            }
        }
        let mut out = DistSpec::finite(
            atoms.iter().map(|&(k, _)| k as f64 / level).collect(),
            atoms.iter().map(|&(_, p)| p).collect(),
            Role::RecoveryRate,
        );
        out.bound = self.bound.map(|b| grid_ceil(b * level) as f64 / level);
        Ok(out)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::UniformInterval => {
                let (lo, hi) = (self.lo.unwrap_or_default(), self.hi.unwrap_or_default());
                lo + (hi - lo) * open_unit(rng)
            }
            _ => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = f64::NAN;
                for (v, p) in self.atoms() {
                    if p <= 0.0 {
                        continue;
                    }
                    acc += p;
                    last = v;
                    if u < acc {
                        return v;
                    }
                }
                last
            }
        }
    }

    fn degenerate_value(&self) -> Option<f64> {
        match self.kind {
            DistKind::Constant => Some(self.values[0]),
            _ => None,
        }
    }
}

fn apply(transform: Transform, v: f64) -> f64 {
    match transform {
        Transform::Identity => v,
        Transform::Reciprocal => 1.0 / v,
        Transform::Resolvent { x, lambda, e_rho } => lambda * e_rho / (v + lambda * x * e_rho),
    }
}

fn snap(x: f64) -> Option<i64> {
    let r = libm::round(x);
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0)).then_some(r as i64)
}

fn grid_ceil(x: f64) -> i64 {
    snap(x).unwrap_or_else(|| libm::ceil(x) as i64)
}

fn grid_floor(x: f64) -> i64 {
    snap(x).unwrap_or_else(|| libm::floor(x) as i64)
}

/// Finite recovery-rate law in class form: rates `y_1 < … < y_k` with
/// masses `q_1, …, q_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    y: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("profile needs at least one class")]
    Empty,
    #[error("`y` and `q` differ in length")]
    LengthMismatch,
    #[error("class rates must be strictly increasing")]
    NotIncreasing,
    #[error("class probabilities must be positive and sum to 1")]
    BadMass,
    #[error("class rates must lie in [1,∞)")]
    RateRange,
    #[error(transparent)]
    Spec(#[from] SpecError),
}

impl ClassProfile {
    pub fn new(y: Vec<f64>, q: Vec<f64>) -> Result<Self, ProfileError> {
        if y.is_empty() {
            return Err(ProfileError::Empty);
        }
        if y.len() != q.len() {
            return Err(ProfileError::LengthMismatch);
        }
        if y.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ProfileError::NotIncreasing);
        }
        if y.iter().any(|&v| !(v >= 1.0 && v.is_finite())) {
            return Err(ProfileError::RateRange);
        }
        let total: f64 = q.iter().sum();
        if q.iter().any(|&p| !(p > 0.0)) || (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(ProfileError::BadMass);
        }
        Ok(Self { y, q })
    }

    /// Class form of a finite recovery-rate law; zero-mass atoms are dropped.
    pub fn from_spec(spec: &DistSpec) -> Result<Self, ProfileError> {
        spec.validate()?;
        if spec.role != Role::RecoveryRate {
            return Err(SpecError::WrongRole(Role::RecoveryRate).into());
        }
        if !spec.is_finite() {
            return Err(SpecError::NotFinite.into());
        }
        let mut atoms: Vec<(f64, f64)> = spec.atoms().filter(|&(_, p)| p > 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect())
    }

    pub fn single(y: f64) -> Self {
        Self { y: vec![y], q: vec![1.0] }
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.y
    }

    pub fn probs(&self) -> &[f64] {
        &self.q
    }

    /// Index of the class whose rate equals `value` (relative tolerance 1e-12).
    pub fn class_of(&self, value: f64) -> Option<usize> {
        self.y.iter().position(|&y| (y - value).abs() <= 1e-12 * y.abs().max(1.0))
    }

    /// `E[f(ξ)]` under the class law.
    pub fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.y.iter().zip(&self.q).map(|(&y, &q)| q * f(y)).sum()
    }

    /// Class sizes for `n` vertices: `⌊q_i n⌋` each, with the remainder
    /// added to the class of largest `q_i` (first on ties).
    pub fn stratified_sizes(&self, n: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.q.iter().map(|&q| libm::floor(q * n as f64) as usize).collect();
        let assigned: usize = sizes.iter().sum();
        let largest = self
            .q
            .iter()
            .enumerate()
            .fold(0, |best, (i, &q)| if q > self.q[best] { i } else { best });
        sizes[largest] += n - assigned;
        sizes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnvMode {
    /// Independent draws for every `ξ(i)`.
    #[default]
    Iid,
    /// Exact class sizes from [`ClassProfile::stratified_sizes`], labels shuffled.
    Stratified,
}

/// Edge weights `ρ(i,j)`, `i ≠ j`.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeWeights {
    /// Every weight equals the same value (degenerate law).
    Constant(f64),
    /// Upper triangle in row-major order: `(i,j)` with `i < j`.
    Table(Vec<f64>),
}

/// Class labels of the vertices when `ξ` has finite support.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassLabels {
    pub profile: ClassProfile,
    pub label: Vec<u32>,
    pub sizes: Vec<usize>,
}

/// One quenched environment `ω` on `C_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    n: usize,
    xi: Vec<f64>,
    weights: EdgeWeights,
    env_seed: u64,
    mode: EnvMode,
    classes: Option<ClassLabels>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("need at least one vertex")]
    NoVertices,
    #[error("rho law: {0}")]
    Rho(SpecError),
    #[error("xi law: {0}")]
    Xi(SpecError),
    #[error("stratified mode needs a finite recovery-rate law")]
    StratifiedNeedsFinite,
    #[error("weight table has length {got}, expected {expected}")]
    TableLength { expected: usize, got: usize },
    #[error("edge weight outside [0,1]")]
    WeightRange,
    #[error("recovery rate below 1")]
    RateRange,
}

#[inline]
fn row_offset(n: usize, i: usize) -> usize {
    i * n - i * (i + 1) / 2
}

impl Environment {
    /// Samples a quenched environment. The result is a pure function of the
    /// arguments.
    pub fn sample(
        rho_spec: &DistSpec,
        xi_spec: &DistSpec,
        n: usize,
        env_seed: u64,
        mode: EnvMode,
    ) -> Result<Self, EnvError> {
        if n < 1 {
            return Err(EnvError::NoVertices);
        }
        rho_spec.validate().map_err(EnvError::Rho)?;
        xi_spec.validate().map_err(EnvError::Xi)?;
        if rho_spec.role != Role::EdgeWeight {
            return Err(EnvError::Rho(SpecError::WrongRole(Role::EdgeWeight)));
        }
        if xi_spec.role != Role::RecoveryRate {
            return Err(EnvError::Xi(SpecError::WrongRole(Role::RecoveryRate)));
        }
        let profile = if xi_spec.is_finite() {
            Some(ClassProfile::from_spec(xi_spec).map_err(|_| EnvError::Xi(SpecError::NotFinite))?)
        } else {
            None
        };

        let mut rng = rng_from_seed(env_seed);
        rng.set_stream(1);
        let (xi, classes) = match mode {
            EnvMode::Iid => {
                let xi: Vec<f64> = (0..n).map(|_| xi_spec.sample(&mut rng)).collect();
                let classes = profile.map(|p| ClassLabels::from_rates(p, &xi));
                (xi, classes)
            }
            EnvMode::Stratified => {
                let profile = profile.ok_or(EnvError::StratifiedNeedsFinite)?;
                let sizes = profile.stratified_sizes(n);
                let mut label: Vec<u32> = sizes
                    .iter()
                    .enumerate()
                    .flat_map(|(c, &s)| core::iter::repeat(c as u32).take(s))
                    .collect();
                label.shuffle(&mut rng);
                let xi = label.iter().map(|&c| profile.rates()[c as usize]).collect();
                (xi, Some(ClassLabels { profile, label, sizes }))
            }
        };

        rng.set_stream(2);
        let weights = match rho_spec.degenerate_value() {
            Some(c) => EdgeWeights::Constant(c),
            None => EdgeWeights::Table((0..n * (n - 1) / 2).map(|_| rho_spec.sample(&mut rng)).collect()),
        };

        Ok(Self { n, xi, weights, env_seed, mode, classes })
    }

    /// Environment with constant edge weight `rho`.
    pub fn homogeneous(xi: Vec<f64>, rho: f64) -> Result<Self, EnvError> {
        Self::from_parts(xi, EdgeWeights::Constant(rho))
    }

    /// Environment from explicit rates and weights. Class labels are
    /// inferred from the distinct rates.
    pub fn from_parts(xi: Vec<f64>, weights: EdgeWeights) -> Result<Self, EnvError> {
        let n = xi.len();
        if n < 1 {
            return Err(EnvError::NoVertices);
        }
        if xi.iter().any(|&v| !(v >= 1.0 && v.is_finite())) {
            return Err(EnvError::RateRange);
        }
        match &weights {
            EdgeWeights::Constant(c) if !(0.0..=1.0).contains(c) => return Err(EnvError::WeightRange),
            EdgeWeights::Table(t) => {
                let expected = n * (n - 1) / 2;
                if t.len() != expected {
                    return Err(EnvError::TableLength { expected, got: t.len() });
                }
                if t.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return Err(EnvError::WeightRange);
                }
            }
            _ => {}
        }
        let mut distinct = xi.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let q = distinct
            .iter()
            .map(|&y| xi.iter().filter(|&&v| v == y).count() as f64 / n as f64)
            .collect::<Vec<_>>();
        // Empirical masses may miss 1 by rounding; renormalize.
        let total: f64 = q.iter().sum();
        let q = q.into_iter().map(|p| p / total).collect();
        let classes = ClassProfile::new(distinct, q).ok().map(|p| ClassLabels::from_rates(p, &xi));
        Ok(Self { n, xi, weights, env_seed: 0, mode: EnvMode::Iid, classes })
    }

    /// Replaces the class profile (e.g. with the law's `q` instead of the
    /// empirical one). Fails if some vertex rate is not a class rate.
    pub fn with_profile(mut self, profile: ClassProfile) -> Option<Self> {
        if self.xi.iter().any(|&v| profile.class_of(v).is_none()) {
            return None;
        }
        self.classes = Some(ClassLabels::from_rates(profile, &self.xi));
        Some(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn weights(&self) -> &EdgeWeights {
        &self.weights
    }

    pub fn env_seed(&self) -> u64 {
        self.env_seed
    }

    pub fn mode(&self) -> EnvMode {
        self.mode
    }

    pub fn classes(&self) -> Option<&ClassLabels> {
        self.classes.as_ref()
    }

    /// `ρ(i,j)` for `i ≠ j`; symmetric in its arguments.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i != j && i < self.n && j < self.n);
        match &self.weights {
            EdgeWeights::Constant(c) => *c,
            EdgeWeights::Table(t) => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                t[row_offset(self.n, a) + b - a - 1]
            }
        }
    }

    /// Calls `f(j, ρ(v,j))` for every `j ≠ v` in increasing `j`.
    #[inline]
    pub fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.n;
        match &self.weights {
            EdgeWeights::Constant(c) => {
                for j in (0..n).filter(|&j| j != v) {
                    f(j, *c);
                }
            }
            EdgeWeights::Table(t) => {
                let mut idx = v.wrapping_sub(1);
                for j in 0..v {
                    f(j, t[idx]);
                    idx += n - j - 2;
                }
                let start = row_offset(n, v);
                for (off, &w) in t[start..start + (n - v - 1)].iter().enumerate() {
                    f(v + 1 + off, w);
                }
            }
        }
    }

    /// All `n(n-1)/2` weights, upper triangle order.
    pub fn weight_list(&self) -> Vec<f64> {
        match &self.weights {
            EdgeWeights::Constant(c) => vec![*c; self.n * (self.n - 1) / 2],
            EdgeWeights::Table(t) => t.clone(),
        }
    }
}

impl ClassLabels {
    fn from_rates(profile: ClassProfile, xi: &[f64]) -> Self {
        let label: Vec<u32> = xi
            .iter()
            .map(|&v| profile.class_of(v).map_or(u32::MAX, |c| c as u32))
            .collect();
        let mut sizes = vec![0; profile.k()];
        for &c in &label {
            if let Some(s) = sizes.get_mut(c as usize) {
                *s += 1;
            }
        }
        Self { profile, label, sizes }
    }
}
