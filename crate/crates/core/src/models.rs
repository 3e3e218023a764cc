//! The desk-scale model catalogue used throughout tests and verification:
//! Brownian motion with and without drift, compound Poisson with two-sided
//! exponential jumps plus drift, and a drift-only subordinator for edge
//! cases.

use crate::levy_model::{JumpLaw, JumpSpec, LevySpec};

/// Driftless standard Brownian motion.
pub fn bm() -> LevySpec {
    LevySpec { drift: 0.0, sigma: 1.0, jumps: JumpSpec::None, kill_rate: 0.0, label: "bm".into() }
}

/// Brownian motion with drift `mu` (unit volatility).
pub fn bm_drift(mu: f64) -> LevySpec {
    LevySpec {
        drift: mu,
        sigma: 1.0,
        jumps: JumpSpec::None,
        kill_rate: 0.0,
        label: format!("bm_drift_{mu}"),
    }
}

/// Compound Poisson with two-sided exponential jumps and positive drift.
/// The sup-time constant is positive for this model and the ladder
/// exponents are rational, so it carries the exact-identity tests.
pub fn cp_two_sided() -> LevySpec {
    LevySpec {
        drift: 1.0,
        sigma: 0.0,
        jumps: JumpSpec::CompoundPoisson {
            rate: 1.0,
            law: JumpLaw::TwoSidedExponential { p_up: 0.3, rate_up: 1.0, rate_down: 1.0 },
        },
        kill_rate: 0.0,
        label: "cp_two_sided".into(),
    }
}

/// Pure drift: the path is its own supremum, no excursions.
pub fn drift_subordinator(b: f64) -> LevySpec {
    LevySpec {
        drift: b,
        sigma: 0.0,
        jumps: JumpSpec::None,
        kill_rate: 0.0,
        label: format!("drift_{b}"),
    }
}

/// The three models exercised by the verification suite.
pub fn catalogue() -> Vec<LevySpec> {
    vec![bm_drift(0.5), bm(), cp_two_sided()]
}
