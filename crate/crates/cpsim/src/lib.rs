//! Experiment harness for the contact process in a random environment on
//! the complete graph: configuration files, replica-parallel sweeps,
//! scaling fits, quasi-stationary statistics and the check suites used by
//! the `cpsim` command-line tool.

pub mod checks;
pub mod config;
pub mod quasi;
pub mod scaling;
pub mod sweep;
pub mod trajectory;

pub use config::{parse_config, ExperimentConfig};
pub use scaling::{fit_scaling, Regime, ScalingFit};
pub use sweep::{run_sweep, SweepRow};
