//! Named experiment suites: every agent of an environment, trained on a few
//! seeds and evaluated on a shared set of trial seeds.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AgentKind, EnvSpec, ExperimentConfig};
use super::eval::{run_eval, run_training, save_metrics, save_training};
use super::metrics::MetricsSeries;
use crate::env::{AttentionConfig, BanditConfig, DiseaseConfig, LendingConfig};
use crate::error::{Error, Result};

/// Trial seeds used by every agent of a suite, so agents face the same draws.
pub const EVAL_SEED_BASE: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Small networks and short runs that finish in minutes on one core.
    Desk,
    /// The environment defaults.
    Full,
}

impl Budget {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Budget::Desk),
            "full" => Ok(Budget::Full),
            other => Err(Error::InvalidConfig(format!("unknown budget `{other}`"))),
        }
    }

    /// `[ppo]` overrides applied on top of the environment defaults.
    pub fn overrides(self, env: &EnvSpec) -> toml::Table {
        let mut t = toml::Table::new();
        if self == Budget::Full {
            return t;
        }
        let iterations = match env {
            EnvSpec::Attention(_) | EnvSpec::Lending(_) => 200,
            EnvSpec::Disease(_) => 100,
            EnvSpec::Bandit(_) => return t,
        };
        t.insert("iterations".into(), toml::Value::Integer(iterations));
        t.insert(
            "hidden_sizes".into(),
            toml::Value::Array(vec![toml::Value::Integer(32), toml::Value::Integer(32)]),
        );
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub name: &'static str,
    pub env: EnvSpec,
    pub agents: Vec<AgentKind>,
    pub trials: usize,
}

pub const SUITES: [&str; 5] = ["smoke", "attention", "attention-hard", "lending", "disease"];

impl Suite {
    pub fn named(name: &str) -> Result<Self> {
        let ppo = [AgentKind::GPpo, AgentKind::RPpo, AgentKind::APpo];
        let (name, env, trials) = match name {
            "smoke" => ("smoke", EnvSpec::Bandit(BanditConfig::default()), 10),
            "attention" => ("attention", EnvSpec::Attention(AttentionConfig::default()), 10),
            "attention-hard" => ("attention-hard", EnvSpec::Attention(AttentionConfig::harder()), 10),
            "lending" => ("lending", EnvSpec::Lending(LendingConfig::default()), 10),
            "disease" => ("disease", EnvSpec::Disease(DiseaseConfig::default()), 200),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown suite `{other}` (expected one of {})",
                    SUITES.join(", ")
                )))
            }
        };
        let agents = if matches!(env, EnvSpec::Bandit(_)) {
            vec![AgentKind::GPpo]
        } else {
            AgentKind::baselines_for(&env).into_iter().chain(ppo).collect()
        };
        Ok(Self {
            name,
            env,
            agents,
            trials,
        })
    }

    pub fn config(&self, agent: AgentKind, budget: Budget) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.env.clone(), agent);
        cfg.trials = self.trials;
        cfg.ppo = budget.overrides(&self.env);
        cfg
    }
}

/// One evaluated agent. `train_seed` is `None` for baselines.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub agent: AgentKind,
    pub train_seed: Option<u64>,
    pub series: MetricsSeries,
}

/// Train (for PPO agents) with `train_seed`, then evaluate on the shared
/// trial seeds. When `out` is set, checkpoints and metrics are written there.
pub fn train_and_evaluate(
    base: &ExperimentConfig,
    train_seed: u64,
    out: Option<&Path>,
) -> Result<MetricsSeries> {
    let mut cfg = base.clone();
    let trained = if cfg.agent.is_ppo() {
        cfg.seed = train_seed;
        let trained = run_training(&cfg)?;
        if let Some(dir) = out {
            save_training(dir, &cfg, &trained)?;
        }
        Some(trained)
    } else {
        None
    };
    cfg.seed = EVAL_SEED_BASE;
    let series = run_eval(&cfg, trained.as_ref().map(|t| &t.policy))?;
    if let Some(dir) = out {
        save_metrics(dir, &series)?;
    }
    Ok(series)
}

/// Evaluate every agent of the suite; PPO agents once per training seed.
pub fn run_suite(suite: &Suite, seeds: &[u64], budget: Budget, out: Option<&Path>) -> Result<Vec<SuiteRun>> {
    let mut runs = Vec::new();
    for &agent in &suite.agents {
        let cfg = suite.config(agent, budget);
        let agent_seeds: Vec<Option<u64>> = if agent.is_ppo() {
            seeds.iter().map(|s| Some(*s)).collect()
        } else {
            vec![None]
        };
        for seed in agent_seeds {
            let dir = out.map(|o| match seed {
                Some(s) => o.join(format!("{agent}-seed{s}")),
                None => o.join(agent.name()),
            });
            log::info!("suite {}: {agent} seed {seed:?}", suite.name);
            let series = train_and_evaluate(&cfg, seed.unwrap_or(0), dir.as_deref())?;
            runs.push(SuiteRun {
                agent,
                train_seed: seed,
                series,
            });
        }
    }
    Ok(runs)
}

/// The headline extra reported per environment, if any.
pub fn headline_extra(env: &str) -> Option<&'static str> {
    match env {
        "attention" => Some("mean_rate"),
        "lending" => Some("bank_cash"),
        "disease" => Some("fraction_infected"),
        _ => None,
    }
}

pub const SUMMARY_HEADER: &str = "agent,train_seed,cumulative_reward,mean_delta,final_delta,headline,headline_final";

pub fn write_summary<W: Write>(runs: &[SuiteRun], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in runs {
        let s = &r.series;
        let (name, value) = match headline_extra(&s.env).and_then(|n| s.extra(n).map(|a| (n, a.last()))) {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.agent,
            r.train_seed.map(|s| s.to_string()).unwrap_or_default(),
            s.mean_cumulative_reward(),
            s.mean_delta(),
            s.final_delta(),
            name,
            value
        )?;
    }
    Ok(())
}
