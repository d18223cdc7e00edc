//! Decision environments with a per-state fairness metric.
//!
//! Every environment exposes the same protocol to the learner: observe the
//! state as a real vector, take an action drawn from a categorical policy
//! head, receive a reward, and report the fairness violation `Δ(s) >= 0` of
//! the current state.

pub mod attention;
pub mod bandit;
pub mod disease;
pub mod lending;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use attention::{AttentionConfig, AttentionEnv};
pub use bandit::{BanditConfig, BanditEnv};
pub use disease::{DiseaseAction, DiseaseConfig, DiseaseEnv};
pub use lending::{LendingConfig, LendingDecision, LendingEnv};

/// RNG used by every simulator. ChaCha keeps streams portable and seekable.
pub type SimRng = ChaCha8Rng;

/// An action in the policy's categorical space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// One category.
    Discrete(usize),
    /// Counts per category from several independent draws.
    Allocation(Vec<usize>),
}

impl Action {
    /// `log π(action)` given per-category log-probabilities. For allocations
    /// this is the log-probability of one ordered draw sequence; the
    /// multinomial coefficient cancels in probability ratios.
    pub fn log_prob(&self, log_probs: &[f64]) -> Result<f64> {
        match self {
            Action::Discrete(k) => log_probs
                .get(*k)
                .copied()
                .ok_or_else(|| Error::InvalidAction(format!("category {k} out of range"))),
            Action::Allocation(counts) => {
                if counts.len() != log_probs.len() {
                    return Err(Error::Shape {
                        context: "allocation action",
                        expected: log_probs.len(),
                        found: counts.len(),
                    });
                }
                Ok(counts
                    .iter()
                    .zip(log_probs)
                    .filter(|(c, _)| **c > 0)
                    .map(|(c, lp)| *c as f64 * lp)
                    .sum())
            }
        }
    }

    /// `d log π(action) / d logits` for a softmax head with probabilities `probs`.
    pub fn log_prob_logit_gradient(&self, probs: &[f64]) -> Vec<f64> {
        match self {
            Action::Discrete(k) => probs
                .iter()
                .enumerate()
                .map(|(j, p)| if j == *k { 1.0 - p } else { -p })
                .collect(),
            Action::Allocation(counts) => {
                let total: usize = counts.iter().sum();
                counts
                    .iter()
                    .zip(probs)
                    .map(|(c, p)| *c as f64 - total as f64 * p)
                    .collect()
            }
        }
    }
}

/// Draw one index from a probability vector.
pub fn sample_categorical(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the running sum; take the last positive entry
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Interface between an environment and the learner or a baseline agent.
pub trait Environment: Clone + Send + Sync {
    fn name(&self) -> &'static str;

    /// Episode length.
    fn horizon(&self) -> usize;

    /// Restore the initial state for a new episode.
    fn reset(&mut self, rng: &mut SimRng);

    fn observation_dim(&self) -> usize;

    fn observe(&self) -> Vec<f64>;

    /// Number of categories of the policy head.
    fn num_actions(&self) -> usize;

    /// Sample an action from policy probabilities.
    fn sample_action(&self, probs: &[f64], rng: &mut SimRng) -> Action {
        Action::Discrete(sample_categorical(probs, rng))
    }

    /// Deterministic action from policy probabilities.
    fn mode_action(&self, probs: &[f64]) -> Action {
        Action::Discrete(argmax(probs))
    }

    /// Advance one step and return the reward.
    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<f64>;

    /// Fairness violation of the current state.
    fn fairness_delta(&self) -> f64;

    /// Names of the environment-specific metric columns.
    fn extra_names(&self) -> Vec<String> {
        Vec::new()
    }

    /// Current values of the metric columns, aligned with `extra_names`.
    fn extras(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Largest pairwise absolute difference, computed from the extremes.
pub(crate) fn max_pairwise_gap(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.len() < 2 {
        0.0
    } else {
        max - min
    }
}
