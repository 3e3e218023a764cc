//! Simulation and statistical verification toolkit for positive self-similar
//! Markov processes (pssMp).
//!
//! A pssMp is built from a Lévy process through the Lamperti transformation:
//! the process started from `x > 0` is `x · exp(ξ)` run on the clock given by
//! the right-continuous inverse of `A_t = ∫₀ᵗ exp(α ξ_s) ds`. This crate
//! simulates the Lévy side on a grid, transports paths across the
//! transformation exactly (the output grid is the image of the input grid, so
//! the round trip is lossless), and builds the fluctuation objects on both
//! sides: running supremum, local time at the supremum, excursions, the
//! bivariate ladder process `(R, H)` of the pssMp, resolvents and entrance
//! laws. Every construction comes with estimators and two-sample tests so
//! that the identities relating them can be checked at desk scale.
//!
//! Modules follow the pipeline order:
//!
//! * [`levy_model`] — parametric Lévy specifications and grid samplers,
//! * [`pathkit`] — path containers and path algebra (suprema, quadrature,
//!   generalized inverses, time reversal),
//! * [`lamperti`] — the transformation in both directions,
//! * [`fluctuation`] — Lévy-side ladder objects, excursions, renewal
//!   measures, Wiener–Hopf diagnostics,
//! * [`ladder`] — the pssMp-side local time `L^Θ`, the triple `(K, R, H)`
//!   and the exit-system check,
//! * [`conditioned`] — the Doney–Tanaka construction and exponential
//!   functionals,
//! * [`resolvent`] — resolvent estimators, the entrance law of `(R, H)` and
//!   of the process itself,
//! * [`stats`] — empirical laws, KS/CvM tests and Monte Carlo accounting.
//!
//! All samplers are pure functions of `(spec, seed)`; per-path randomness is
//! derived by counter-mode stream splitting, so results never depend on
//! thread count or aggregation order.

pub mod conditioned;
pub mod error;
pub mod fluctuation;
pub mod ladder;
pub mod lamperti;
pub mod levy_model;
pub mod models;
pub mod parallel;
pub mod pathkit;
pub mod resolvent;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use seed::Seed;
