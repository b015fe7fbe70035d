//! Exact simulation and numerical analysis of the contact process on the
//! complete graph `C_n` with i.i.d. random recovery rates `ξ(i)` and i.i.d.
//! random edge weights `ρ(i,j)`.
//!
//! A healthy vertex `i` becomes infected at rate `(λ/n) Σ_{j≠i} ρ(i,j) η(j)`
//! and an infected vertex recovers at rate `ξ(i)`. The critical infection
//! rate is `λ_c = 1 / (Eρ · E(1/ξ))`.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the command line
//! and experiment orchestration live in the `cpsim` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod env;
pub mod graphical;
pub mod meanfield;
pub mod oracle;
pub mod rate_tree;
pub mod seed;
pub mod stats;
pub mod theory;

pub use dynamics::{ContactProcess, Configuration, Outcome, RateTable, Sample, StepResult};
pub use env::{ClassProfile, DistKind, DistSpec, EdgeWeights, EnvMode, Environment, Role, Transform};
pub use graphical::GraphicalRealization;
pub use meanfield::{MeanFieldSolution, ProportionTrajectory};
pub use seed::{SimRng, Stream};
