//! Contextual bandits under instance-level auxiliary safety constraints.
//!
//! A policy must keep the expected constraint metric of every action it takes
//! at or above `(1 − α)` times that of a known baseline action. The crate
//! provides TS-ASC (Thompson sampling with a sampled feasibility filter), the
//! conservative UCB comparators CLUCB2-ASC-C and CLUCB2-ASC-I, a synthetic
//! linear problem, an upload-quality simulator, an evaluation harness and a
//! reward-shape tuner.

pub mod bayes;
pub mod commands;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod policies;
pub mod problems;
pub mod rng;
pub mod tuning;

pub use error::{Error, Result};
