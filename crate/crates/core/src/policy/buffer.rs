//! Episode-grouped transition storage with return and advantage estimates.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::nn::MlpNetwork;

/// One environment step, annotated with the fairness violation before and
/// after the action.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state_obs: Vec<f64>,
    pub action: Action,
    /// Reward the learner optimizes (after any fairness penalty).
    pub reward: f64,
    /// Reward reported by the environment.
    pub env_reward: f64,
    pub next_state_obs: Vec<f64>,
    pub log_prob_behavior: f64,
    pub delta_t: f64,
    pub delta_next: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AdvantageMethod {
    /// `Â_t = G_t - V(s_t)`.
    ReturnsMinusBaseline,
    /// Generalized advantage estimation.
    Gae { lambda: f64 },
}

impl AdvantageMethod {
    pub fn label(&self) -> String {
        match self {
            AdvantageMethod::ReturnsMinusBaseline => "returns_minus_baseline".into(),
            AdvantageMethod::Gae { lambda } => format!("gae(lambda={lambda})"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    transitions: Vec<Transition>,
    episodes: Vec<Range<usize>>,
    returns: Vec<f64>,
    advantages: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append one complete episode.
    pub fn push_episode(&mut self, episode: Vec<Transition>) {
        let start = self.transitions.len();
        self.transitions.extend(episode);
        self.episodes.push(start..self.transitions.len());
        self.returns.clear();
        self.advantages.clear();
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn episodes(&self) -> &[Range<usize>] {
        &self.episodes
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    /// `G_t = r_t + γ G_{t+1}` backwards within each episode; the last step of
    /// an episode has `G = r`.
    pub fn compute_returns(&mut self, gamma: f64) {
        self.returns = vec![0.0; self.transitions.len()];
        for ep in &self.episodes {
            let mut running = 0.0;
            for i in ep.clone().rev() {
                running = self.transitions[i].reward + gamma * running;
                self.returns[i] = running;
            }
        }
    }

    pub fn estimate_advantages(
        &mut self,
        value_net: &MlpNetwork,
        method: AdvantageMethod,
        gamma: f64,
    ) -> Result<()> {
        if self.returns.len() != self.transitions.len() {
            return Err(Error::InvalidConfig(
                "returns must be computed before advantages".into(),
            ));
        }
        let values = self
            .transitions
            .iter()
            .map(|t| value_net.predict(&t.state_obs).map(|v| v[0]))
            .collect::<Result<Vec<f64>>>()?;
        self.advantages = match method {
            AdvantageMethod::ReturnsMinusBaseline => {
                self.returns.iter().zip(&values).map(|(g, v)| g - v).collect()
            }
            AdvantageMethod::Gae { lambda } => {
                let mut adv = vec![0.0; self.transitions.len()];
                for ep in &self.episodes {
                    let mut running = 0.0;
                    for i in ep.clone().rev() {
                        let tr = &self.transitions[i];
                        let next_value = if tr.terminal || i + 1 == ep.end {
                            0.0
                        } else {
                            values[i + 1]
                        };
                        let td = tr.reward + gamma * next_value - values[i];
                        running = td + gamma * lambda * running;
                        adv[i] = running;
                    }
                }
                adv
            }
        };
        Ok(())
    }

    /// Replace advantages directly.
    pub fn set_advantages(&mut self, advantages: Vec<f64>) -> Result<()> {
        if advantages.len() != self.transitions.len() {
            return Err(Error::Shape {
                context: "advantages",
                expected: self.transitions.len(),
                found: advantages.len(),
            });
        }
        self.advantages = advantages;
        Ok(())
    }
}
