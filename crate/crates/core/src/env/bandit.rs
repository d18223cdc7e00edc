//! Multi-armed bandit with a constant observation and no fairness pressure.
//! Used for smoke runs and learner sanity checks.

use serde::{Deserialize, Serialize};

use super::{Action, Environment, SimRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    /// Deterministic payoff of each arm.
    pub payoffs: Vec<f64>,
    pub horizon: usize,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            payoffs: vec![1.0, 0.0],
            horizon: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BanditEnv {
    config: BanditConfig,
    t: usize,
}

impl BanditEnv {
    pub fn new(config: BanditConfig) -> Result<Self> {
        if config.payoffs.len() < 2 || config.horizon == 0 {
            return Err(Error::InvalidConfig(
                "bandit needs at least two arms and a positive horizon".into(),
            ));
        }
        Ok(Self { config, t: 0 })
    }
}

impl Environment for BanditEnv {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, _rng: &mut SimRng) {
        self.t = 0;
    }

    fn observation_dim(&self) -> usize {
        1
    }

    fn observe(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn num_actions(&self) -> usize {
        self.config.payoffs.len()
    }

    fn step(&mut self, action: &Action, _rng: &mut SimRng) -> Result<f64> {
        let Action::Discrete(arm) = *action else {
            return Err(Error::InvalidAction("bandit takes a single arm".into()));
        };
        let payoff = *self
            .config
            .payoffs
            .get(arm)
            .ok_or_else(|| Error::InvalidAction(format!("arm {arm} out of range")))?;
        self.t += 1;
        Ok(payoff)
    }

    fn fairness_delta(&self) -> f64 {
        0.0
    }
}
