//! Receding-horizon gradient-based control for linear systems with a finite
//! window of exact cost predictions, plus the machinery needed to measure
//! dynamic regret: offline-optimal oracles, steady-state initialization,
//! quadratic-tracking dynamic programming, an adversarial tracking family
//! with verifiable structure, and an experiment harness.

pub mod adversary;
pub mod algorithms;
pub mod baselines;
pub mod canonical;
pub mod cost;
pub mod error;
pub mod generate;
pub mod harness;
pub mod linalg;
pub mod lqt;
pub mod optimize;
pub mod reformulate;
pub mod robot;

pub use error::{Error, Result};
