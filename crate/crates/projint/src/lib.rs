//! Seamless projective integration for stiff slow-fast ODE systems.
//!
//! Systems of the form
//!
//! ```text
//! dy/dt = g(x, y)                        (slow variables, R^n)
//! dx/dt = (Λ/ε) (-x + h0(y))             (fast variables, R^m, Λ diagonal)
//! ```
//!
//! relax onto a slow manifold x ≈ h0(y) on the fast time scale ε and then
//! evolve slowly. Explicit integrators applied directly are limited to steps
//! of order ε. The two schemes implemented here — PI1 and PI2 — interleave a
//! short explicit *microsolver* (which damps the fast variables toward the
//! manifold) with Runge-Kutta style *macro* increments spanning Δt ≫ ε, so
//! the slow dynamics is resolved at macro cost.
//!
//! PI1 builds increments from vector-field evaluations after each relaxation;
//! PI2 replaces them with chords between relaxed endpoints, which point back
//! toward the manifold and reduce both the microstep error contribution and
//! the departure of the fast variables from the manifold (quadratic instead
//! of linear in the macrostep).
//!
//! # Crate layout
//!
//! - [`model`]: system definitions, the benchmark slow-fast system, and the
//!   reduced dynamics dY/dt = g(h0(Y), Y).
//! - [`rk`]: explicit Runge-Kutta machinery in recursive-increment form and
//!   the linear amplification factor ρ.
//! - [`micro`]: the microsolver flow map φ^{m,δt}.
//! - [`pi`]: PI1/PI2 macrosteps, microstep allocation, the outer loop, and
//!   deviation bookkeeping.
//! - [`analysis`]: stability indicators, deviation-bound evaluators, error
//!   metrics and log-log slope fitting.
//! - [`bench`]: reference oracles, the five benchmark experiments, CSV/JSON
//!   emission, and the CLI (`projint` binary).
//!
//! The `examples/` directory contains one runnable example per capability;
//! start with `cargo run --example integrate_pi2`.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod micro;
pub mod model;
pub mod pi;
pub mod rk;

pub use analysis::{loglog_slope, stability_indicator, BoundConstants, StabilityReport};
pub use error::Error;
pub use micro::{contraction_factor, micro_flow, MicroConfig};
pub use model::{make_toy_system, FullState, MultiscaleSystem, ReducedSystem};
pub use pi::{pi1_step, pi2_step, run, PiConfig, Scheme, StepDiagnostics, TrajectoryRecord};
pub use rk::{amplification, rk_step, RkTableau};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
