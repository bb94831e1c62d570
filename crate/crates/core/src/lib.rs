//! Adversarial inference against a cognitive sensor.
//!
//! Two players: "us" (a probe signal with linear-Gaussian dynamics) and an
//! adversary tracker that observes us in noise, runs a Bayesian filter and
//! acts on its posterior. We only see our own state and noisy measurements
//! of the adversary's actions. This crate provides:
//!
//! - [`state_space`]: linear-Gaussian modeling, simulation, Kalman and
//!   information filtering, and an iterative algebraic Riccati solver.
//! - [`inverse_filter`]: estimators of the adversary's posterior — the
//!   inverse Kalman filter, the exact mixture filter on finite state
//!   spaces, and a sequential Monte-Carlo variant.
//! - [`identification`]: maximum-likelihood estimation of the adversary's
//!   sensor gain and Cramér–Rao bound comparison (classic vs. inverse).
//! - [`slow_learning`]: cascaded-filter experiments exhibiting the
//!   O(k^-1/3) slow-learning phase transition and the sequential
//!   localization game.
//! - [`revealed_prefs`]: nonparametric detection and reconstruction of
//!   utility-maximizing behavior (GARP, Afriat feasibility, spectral
//!   probes, noisy detection, SPSA probe optimization).
//!
//! All types are immutable values after construction and all operations
//! are pure functions of their inputs (randomized ones take an explicit
//! seed), so everything is safe to call concurrently.

pub mod config;
pub mod error;
pub mod identification;
pub mod inverse_filter;
pub mod linalg;
pub mod revealed_prefs;
pub mod slow_learning;
pub mod state_space;

pub use error::{Error, Result};
