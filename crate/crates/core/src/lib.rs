//! Structured scene-event episodic memory engine and evaluation harness.
//!
//! The pipeline turns agent trajectories into per-step structured memory
//! units, retrieves anchor-sensitive evidence for trajectory-grounded
//! questions, packs it under a token budget, and answers deterministically.
//! Around that core sit two seeded simulators that ground the questions,
//! a template question generator, a set of baseline memory interfaces,
//! and an evaluation harness with exact-match scoring and bootstrap
//! statistics.

pub mod anchor;
pub mod answer;
pub mod baselines;
pub mod envs;
pub mod error;
pub mod eval;
pub mod harness;
pub mod memory;
pub mod pack;
pub mod qa;
pub mod retrieval;
pub mod traj;

pub use error::EngineError;
