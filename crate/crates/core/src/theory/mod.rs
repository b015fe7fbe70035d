//! Numerical checks of the quantitative estimates behind the phase transition:
//! range asymptotics of the simple random walk on `C_n` and its
//! coupon-collector tail bound, the drift bounds `θ^±` / `α^±` of the
//! class-count chain, and the dominating biased walk.

mod drift;
mod range;
mod walk;

pub use drift::{empirical_drift_check, theta_bounds, ClassDrift, DriftBounds, DriftReport, DriftVerdict};
pub use range::{
    coupon_bound_check, coupon_lhs_exact, coupon_rhs, enumerate_range_distribution, geometric_sum_sample, range_hitting_time,
    srw_range, srw_range_estimate, tau_dominance_check, CouponReport, DominanceReport, RangeEstimate, MAX_ENUMERATED_PATHS,
};
pub use walk::{simulate_dominating_walk, WalkExitReport, WalkRates};

use thiserror::Error;

use crate::env::SpecError;
use crate::meanfield::MeanFieldError;

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum TheoryError {
    #[error("argument out of range: {0}")]
    Argument(&'static str),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("need a < b < x* = {x_star}")]
    BeyondFixedPoint { x_star: f64 },
    #[error("no drift gap: θ+/θ- = {ratio} ≤ 1")]
    NoDriftGap { ratio: f64 },
    #[error("bound vacuous: m(1-ε)e^θ = {lhs} ≥ n-1")]
    BoundVacuous { lhs: f64 },
    #[error("enumeration too large")]
    TooLarge,
    #[error("environment has no class labels matching the profile")]
    Classes,
    #[error("box B_n(a,b) contains no integer point for class {class}")]
    EmptyBox { class: usize },
}

/// Mean and standard error of `k` successes out of `trials`.
fn proportion(k: u64, trials: u64) -> (f64, f64) {
    let p = k as f64 / trials as f64;
    (p, libm::sqrt(p * (1.0 - p) / trials as f64))
}
