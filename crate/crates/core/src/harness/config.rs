//! Experiment configuration files.
//!
//! ```toml
//! agent = "a_ppo"
//! seed = 0
//! trials = 10
//!
//! [env]
//! kind = "attention"
//! sites = 10
//!
//! [ppo]          # overrides of the environment's training defaults
//! iterations = 200
//!
//! [fairness]     # overrides of the agent's default fairness weights
//! beta = [0.05, 0.32, 0.63]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{RateEstimator, EO_TOLERANCE};
use crate::env::{
    AttentionConfig, AttentionEnv, BanditConfig, BanditEnv, DiseaseConfig, DiseaseEnv, LendingConfig,
    LendingEnv,
};
use crate::error::{Error, Result};
use crate::policy::{AdvantageMethod, FairnessMode, PpoConfig, RegularizerConfig, DEFAULT_OMEGA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Attention(AttentionConfig),
    Lending(LendingConfig),
    Disease(DiseaseConfig),
    Bandit(BanditConfig),
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Attention(_) => "attention",
            EnvSpec::Lending(_) => "lending",
            EnvSpec::Disease(_) => "disease",
            EnvSpec::Bandit(_) => "bandit",
        }
    }

    pub fn build(&self) -> Result<EnvInstance> {
        Ok(match self {
            EnvSpec::Attention(c) => EnvInstance::Attention(AttentionEnv::new(c.clone())?),
            EnvSpec::Lending(c) => EnvInstance::Lending(LendingEnv::new(c.clone())?),
            EnvSpec::Disease(c) => EnvInstance::Disease(DiseaseEnv::new(c.clone())?),
            EnvSpec::Bandit(c) => EnvInstance::Bandit(BanditEnv::new(c.clone())?),
        })
    }

    /// Training defaults for this environment before any `[ppo]` overrides.
    pub fn default_ppo(&self) -> PpoConfig {
        let base = PpoConfig::default();
        match self {
            EnvSpec::Attention(_) => PpoConfig {
                iterations: 400,
                episodes_per_iteration: 8,
                ..base
            },
            EnvSpec::Lending(_) => PpoConfig {
                iterations: 300,
                episodes_per_iteration: 8,
                advantage: AdvantageMethod::Gae { lambda: 0.95 },
                entropy_coef: 0.01,
                ..base
            },
            EnvSpec::Disease(_) => PpoConfig {
                iterations: 500,
                episodes_per_iteration: 16,
                minibatch_size: 64,
                ..base
            },
            EnvSpec::Bandit(_) => PpoConfig {
                iterations: 200,
                episodes_per_iteration: 4,
                minibatch_size: 32,
                hidden_sizes: vec![16],
                policy_step: 1e-2,
                value_step: 1e-2,
                ..base
            },
        }
    }
}

/// A constructed environment of any supported kind.
#[derive(Debug, Clone)]
pub enum EnvInstance {
    Attention(AttentionEnv),
    Lending(LendingEnv),
    Disease(DiseaseEnv),
    Bandit(BanditEnv),
}

/// Run `$body` with `$env` bound to the concrete environment.
#[macro_export]
macro_rules! with_env {
    ($instance:expr, $env:ident => $body:expr) => {
        match $instance {
            $crate::harness::EnvInstance::Attention($env) => $body,
            $crate::harness::EnvInstance::Lending($env) => $body,
            $crate::harness::EnvInstance::Disease($env) => $body,
            $crate::harness::EnvInstance::Bandit($env) => $body,
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    PurelyGreedy,
    GreedyLend,
    Eo,
    Random,
    MaxNeighbor,
    GPpo,
    RPpo,
    APpo,
}

impl AgentKind {
    pub const ALL: [AgentKind; 8] = [
        AgentKind::PurelyGreedy,
        AgentKind::GreedyLend,
        AgentKind::Eo,
        AgentKind::Random,
        AgentKind::MaxNeighbor,
        AgentKind::GPpo,
        AgentKind::RPpo,
        AgentKind::APpo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::PurelyGreedy => "purely_greedy",
            AgentKind::GreedyLend => "greedy_lend",
            AgentKind::Eo => "eo",
            AgentKind::Random => "random",
            AgentKind::MaxNeighbor => "max_neighbor",
            AgentKind::GPpo => "g_ppo",
            AgentKind::RPpo => "r_ppo",
            AgentKind::APpo => "a_ppo",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown agent `{name}`")))
    }

    pub fn is_ppo(self) -> bool {
        matches!(self, AgentKind::GPpo | AgentKind::RPpo | AgentKind::APpo)
    }

    /// Whether this agent can act in the given environment.
    pub fn supports(self, env: &EnvSpec) -> bool {
        match self {
            AgentKind::PurelyGreedy => matches!(env, EnvSpec::Attention(_)),
            AgentKind::GreedyLend | AgentKind::Eo => matches!(env, EnvSpec::Lending(_)),
            AgentKind::Random | AgentKind::MaxNeighbor => matches!(env, EnvSpec::Disease(_)),
            AgentKind::GPpo | AgentKind::RPpo | AgentKind::APpo => true,
        }
    }

    /// Baselines available for an environment.
    pub fn baselines_for(env: &EnvSpec) -> Vec<AgentKind> {
        Self::ALL
            .into_iter()
            .filter(|a| !a.is_ppo() && a.supports(env))
            .collect()
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Overrides of the per-environment fairness weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessOverrides {
    pub zeta: Option<f64>,
    pub omega: Option<f64>,
    pub beta: Option<[f64; 3]>,
    pub normalize: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub smoothing: f64,
    pub initial_estimate: f64,
    pub eo_tolerance: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            smoothing: RateEstimator::DEFAULT_SMOOTHING,
            initial_estimate: 1.0,
            eo_tolerance: EO_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Sample from the policy, as during training.
    #[default]
    Sample,
    /// Take the most probable action.
    Argmax,
}

fn default_trials() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub mode: ActionMode,
    pub env: EnvSpec,
    #[serde(default)]
    pub ppo: toml::Table,
    #[serde(default)]
    pub fairness: FairnessOverrides,
    #[serde(default)]
    pub baseline: BaselineParams,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, agent: AgentKind) -> Self {
        Self {
            agent,
            seed: 0,
            trials: default_trials(),
            mode: ActionMode::Sample,
            env,
            ppo: toml::Table::new(),
            fairness: FairnessOverrides::default(),
            baseline: BaselineParams::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::parse("experiment config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file. A relative disease graph path is resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let EnvSpec::Disease(d) = &mut cfg.env {
            if let Some(graph) = &d.graph {
                let p = PathBuf::from(graph);
                if p.is_relative() {
                    if let Some(dir) = path.parent() {
                        d.graph = Some(dir.join(p).to_string_lossy().into_owned());
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !self.agent.supports(&self.env) {
            return Err(Error::InvalidConfig(format!(
                "agent `{}` cannot act in the {} environment",
                self.agent,
                self.env.name()
            )));
        }
        if self.ppo.contains_key("fairness") {
            return Err(Error::InvalidConfig(
                "set fairness weights in the [fairness] table, not [ppo]".into(),
            ));
        }
        if self.agent.is_ppo() {
            self.ppo_config()?.validate()?;
        }
        Ok(())
    }

    /// Fairness shaping for the configured agent.
    pub fn fairness_mode(&self) -> FairnessMode {
        let o = &self.fairness;
        let omega = o.omega.unwrap_or(DEFAULT_OMEGA);
        match self.agent {
            AgentKind::RPpo => {
                let zeta = match &self.env {
                    EnvSpec::Attention(_) => 10.0,
                    EnvSpec::Lending(_) => 2.0,
                    EnvSpec::Disease(_) => 0.1,
                    EnvSpec::Bandit(_) => 1.0,
                };
                FairnessMode::RewardPenalty {
                    zeta: o.zeta.unwrap_or(zeta),
                    omega,
                }
            }
            AgentKind::APpo => {
                let (beta, normalize) = match &self.env {
                    EnvSpec::Attention(_) => ([0.05, 0.32, 0.63], false),
                    EnvSpec::Lending(_) => ([1.0, 0.5, 0.5], true),
                    EnvSpec::Disease(_) => ([0.6, 0.15, 0.25], true),
                    EnvSpec::Bandit(_) => ([1.0, 0.0, 0.0], false),
                };
                let [beta0, beta1, beta2] = o.beta.unwrap_or(beta);
                FairnessMode::AdvantageRegularized(RegularizerConfig {
                    beta0,
                    beta1,
                    beta2,
                    omega,
                    normalize: o.normalize.unwrap_or(normalize),
                })
            }
            _ => FairnessMode::Greedy,
        }
    }

    /// Environment defaults, then `[ppo]` overrides, then the agent's fairness mode.
    pub fn ppo_config(&self) -> Result<PpoConfig> {
        let defaults = self.env.default_ppo();
        let mut table = toml::Table::try_from(&defaults)
            .map_err(|e| Error::InvalidConfig(format!("serializing training defaults: {e}")))?;
        for (key, value) in &self.ppo {
            table.insert(key.clone(), value.clone());
        }
        let mut cfg: PpoConfig = table
            .try_into()
            .map_err(|e| Error::parse("[ppo] table", e))?;
        cfg.fairness = self.fairness_mode();
        Ok(cfg)
    }

    /// Apply `[ppo]` overrides programmatically.
    pub fn with_ppo_overrides(mut self, overrides: &PpoConfig) -> Result<Self> {
        let table = toml::Table::try_from(overrides)
            .map_err(|e| Error::InvalidConfig(format!("serializing overrides: {e}")))?;
        self.ppo = table;
        self.ppo.remove("fairness");
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::parse(
            r#"
            agent = "r_ppo"
            [env]
            kind = "lending"
            horizon = 50
            "#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 10);
        let EnvSpec::Lending(l) = &cfg.env else { panic!() };
        assert_eq!(l.horizon, 50);
        assert_eq!(
            cfg.fairness_mode(),
            FairnessMode::RewardPenalty {
                zeta: 2.0,
                omega: DEFAULT_OMEGA
            }
        );
    }

    #[test]
    fn rejects_incompatible_agent() {
        let err = ExperimentConfig::parse("agent = \"eo\"\n[env]\nkind = \"attention\"\n");
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExperimentConfig::parse("agent = \"g_ppo\"\n[env]\nkind = \"bandit\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("agent = \"g_ppo\"\ncolour = 1\n[env]\nkind = \"bandit\"\n").is_err());
        assert!(ExperimentConfig::parse("agent = \"g_ppo\"\n[env]\nkind = \"bandit\"\n[ppo]\nlr = 1\n").is_err());
    }

    #[test]
    fn ppo_overrides_merge_over_env_defaults() {
        let cfg = ExperimentConfig::parse(
            "agent = \"a_ppo\"\n[env]\nkind = \"disease\"\n[ppo]\niterations = 7\n[fairness]\nbeta = [1.0, 0.0, 0.0]\n",
        )
        .unwrap();
        let ppo = cfg.ppo_config().unwrap();
        assert_eq!(ppo.iterations, 7);
        assert_eq!(ppo.episodes_per_iteration, 16);
        let FairnessMode::AdvantageRegularized(r) = ppo.fairness else { panic!() };
        assert_eq!((r.beta0, r.beta1, r.beta2, r.normalize), (1.0, 0.0, 0.0, true));
    }

    #[test]
    fn table_defaults() {
        let a = ExperimentConfig::new(EnvSpec::Attention(AttentionConfig::default()), AgentKind::APpo);
        let FairnessMode::AdvantageRegularized(r) = a.fairness_mode() else { panic!() };
        assert_eq!((r.beta0, r.beta1, r.beta2, r.normalize), (0.05, 0.32, 0.63, false));
        let g = ExperimentConfig::new(EnvSpec::Disease(DiseaseConfig::default()), AgentKind::GPpo);
        assert_eq!(g.fairness_mode(), FairnessMode::Greedy);
    }
}
