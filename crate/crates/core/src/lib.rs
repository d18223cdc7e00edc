//! Fairness-aware reinforcement learning for long-term resource allocation.
//!
//! Three simulators (attention allocation, lending, vaccination on a social
//! network), hand-designed baselines, a clipped policy-gradient learner with
//! reward- and advantage-based fairness shaping, and evaluation utilities.

pub mod baselines;
pub mod env;
pub mod error;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod policy;

pub use error::{Error, Result};
