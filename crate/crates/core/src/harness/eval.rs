//! Training runs, checkpoints and multi-trial evaluation.

use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ActionMode, AgentKind, BaselineParams, EnvInstance, ExperimentConfig};
use super::metrics::{MetricsSeries, TrialSeries};
use crate::baselines::{
    eo_thresholds, greedy_lend, max_neighbor_vaccinate, purely_greedy_allocate, random_vaccinate,
    RateEstimator,
};
use crate::env::{Action, AttentionEnv, DiseaseEnv, Environment, LendingEnv, SimRng};
use crate::error::{Error, Result};
use crate::nn::{Head, MlpNetwork};
use crate::policy::{train, PpoConfig, TrainedAgent};
use crate::with_env;

/// Anything that picks actions in an environment during evaluation.
pub trait Actor<E: Environment> {
    fn act(&mut self, env: &E, rng: &mut SimRng) -> Result<Action>;

    /// Called after every environment step.
    fn observe(&mut self, _env: &E) {}
}

pub struct PolicyActor<'a> {
    pub policy: &'a MlpNetwork,
    pub mode: ActionMode,
}

impl<E: Environment> Actor<E> for PolicyActor<'_> {
    fn act(&mut self, env: &E, rng: &mut SimRng) -> Result<Action> {
        let probs = self.policy.predict(&env.observe())?;
        Ok(match self.mode {
            ActionMode::Sample => env.sample_action(&probs, rng),
            ActionMode::Argmax => env.mode_action(&probs),
        })
    }
}

pub struct PurelyGreedyActor {
    estimator: RateEstimator,
}

impl Actor<AttentionEnv> for PurelyGreedyActor {
    fn act(&mut self, env: &AttentionEnv, _rng: &mut SimRng) -> Result<Action> {
        Ok(Action::Allocation(purely_greedy_allocate(
            self.estimator.estimates(),
            env.config().units,
        )))
    }

    fn observe(&mut self, env: &AttentionEnv) {
        self.estimator.update(&env.state().last_discovered);
    }
}

pub struct GreedyLender;

impl Actor<LendingEnv> for GreedyLender {
    fn act(&mut self, env: &LendingEnv, _rng: &mut SimRng) -> Result<Action> {
        let cfg = env.config();
        let eta = env.repayment(env.state().applicant.credit_score);
        Ok(Action::Discrete(greedy_lend(eta, cfg.loan_amount, cfg.interest_rate).index()))
    }
}

pub struct EoLender {
    pub tolerance: f64,
}

impl Actor<LendingEnv> for EoLender {
    fn act(&mut self, env: &LendingEnv, _rng: &mut SimRng) -> Result<Action> {
        let cfg = env.config();
        let s = env.state();
        let thresholds = eo_thresholds(
            &s.distributions,
            env.repayment_table(),
            cfg.loan_amount,
            cfg.interest_rate,
            self.tolerance,
        );
        let a = s.applicant;
        Ok(Action::Discrete(thresholds.decide(a.group, a.credit_score).index()))
    }
}

pub struct RandomVaccinator;

impl Actor<DiseaseEnv> for RandomVaccinator {
    fn act(&mut self, env: &DiseaseEnv, rng: &mut SimRng) -> Result<Action> {
        Ok(Action::Discrete(env.encode(random_vaccinate(env, rng))))
    }
}

pub struct MaxNeighborVaccinator;

impl Actor<DiseaseEnv> for MaxNeighborVaccinator {
    fn act(&mut self, env: &DiseaseEnv, _rng: &mut SimRng) -> Result<Action> {
        Ok(Action::Discrete(env.encode(max_neighbor_vaccinate(env))))
    }
}

/// Run `trials` episodes; trial `i` uses a generator seeded with
/// `seed_base + i`. Trials run in parallel and are merged in order.
pub fn run_trials<E, A, F>(env: &E, trials: usize, seed_base: u64, make_actor: F) -> Result<Vec<TrialSeries>>
where
    E: Environment,
    A: Actor<E>,
    F: Fn() -> A + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SimRng::seed_from_u64(seed_base.wrapping_add(i as u64));
            let mut env = env.clone();
            let mut actor = make_actor();
            env.reset(&mut rng);
            let horizon = env.horizon();
            let n_extras = env.extra_names().len();
            let mut series = TrialSeries {
                reward: Vec::with_capacity(horizon),
                delta: Vec::with_capacity(horizon),
                extras: vec![Vec::with_capacity(horizon); n_extras],
            };
            for t in 0..horizon {
                let action = actor.act(&env, &mut rng)?;
                let reward = env.step(&action, &mut rng).map_err(|e| Error::EnvStep {
                    episode: i,
                    t,
                    source: Box::new(e),
                })?;
                actor.observe(&env);
                series.reward.push(reward);
                series.delta.push(env.fairness_delta());
                for (col, v) in series.extras.iter_mut().zip(env.extras()) {
                    col.push(v);
                }
            }
            Ok(series)
        })
        .collect()
}

fn check_policy<E: Environment>(env: &E, policy: &MlpNetwork) -> Result<()> {
    if policy.head() != Head::SoftmaxPolicy {
        return Err(Error::InvalidConfig("checkpoint is not a policy network".into()));
    }
    if policy.input_dim() != env.observation_dim() {
        return Err(Error::Shape {
            context: "checkpoint input vs observation",
            expected: env.observation_dim(),
            found: policy.input_dim(),
        });
    }
    if policy.output_dim() != env.num_actions() {
        return Err(Error::Shape {
            context: "checkpoint output vs action space",
            expected: env.num_actions(),
            found: policy.output_dim(),
        });
    }
    Ok(())
}

fn baseline_trials(
    instance: &EnvInstance,
    agent: AgentKind,
    params: &BaselineParams,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialSeries>> {
    match (agent, instance) {
        (AgentKind::PurelyGreedy, EnvInstance::Attention(env)) => run_trials(env, trials, seed, || PurelyGreedyActor {
            estimator: RateEstimator::new(env.config().sites, params.initial_estimate, params.smoothing),
        }),
        (AgentKind::GreedyLend, EnvInstance::Lending(env)) => run_trials(env, trials, seed, || GreedyLender),
        (AgentKind::Eo, EnvInstance::Lending(env)) => run_trials(env, trials, seed, || EoLender {
            tolerance: params.eo_tolerance,
        }),
        (AgentKind::Random, EnvInstance::Disease(env)) => run_trials(env, trials, seed, || RandomVaccinator),
        (AgentKind::MaxNeighbor, EnvInstance::Disease(env)) => run_trials(env, trials, seed, || MaxNeighborVaccinator),
        _ => Err(Error::InvalidConfig(format!(
            "agent `{agent}` has no baseline controller for this environment"
        ))),
    }
}

/// Evaluate the configured agent over `config.trials` episodes seeded from
/// `config.seed`. PPO agents need a policy checkpoint; baselines ignore it.
pub fn run_eval(config: &ExperimentConfig, policy: Option<&MlpNetwork>) -> Result<MetricsSeries> {
    config.validate()?;
    let instance = config.env.build()?;
    let (trials, names) = if config.agent.is_ppo() {
        let policy = policy.ok_or_else(|| {
            Error::InvalidConfig(format!("agent `{}` needs a policy checkpoint", config.agent))
        })?;
        with_env!(&instance, env => {
            check_policy(env, policy)?;
            let trials = run_trials(env, config.trials, config.seed, || PolicyActor { policy, mode: config.mode })?;
            (trials, env.extra_names())
        })
    } else {
        let trials = baseline_trials(&instance, config.agent, &config.baseline, config.trials, config.seed)?;
        (trials, with_env!(&instance, env => env.extra_names()))
    };
    MetricsSeries::from_trials(config.env.name(), config.agent.name(), config.seed, names, trials)
}

/// Train the configured PPO agent with `config.seed`.
pub fn run_training(config: &ExperimentConfig) -> Result<TrainedAgent> {
    config.validate()?;
    if !config.agent.is_ppo() {
        return Err(Error::InvalidConfig(format!(
            "agent `{}` is a fixed baseline and is not trained",
            config.agent
        )));
    }
    let ppo = config.ppo_config()?;
    let instance = config.env.build()?;
    with_env!(&instance, env => train(env, &ppo, config.seed))
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    agent: &'a str,
    env: &'a str,
    seed: u64,
    ppo: &'a PpoConfig,
    env_config: &'a super::config::EnvSpec,
}

pub const POLICY_FILE: &str = "policy.ckpt";
pub const VALUE_FILE: &str = "value.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const RUN_FILE: &str = "run.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";

/// Write checkpoints, training log and run metadata into `dir`.
pub fn save_training(dir: &Path, config: &ExperimentConfig, trained: &TrainedAgent) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    trained.policy.save(&dir.join(POLICY_FILE))?;
    trained.value.save(&dir.join(VALUE_FILE))?;
    trained.log.save_csv(&dir.join(TRAIN_LOG_FILE))?;
    let ppo = config.ppo_config()?;
    let meta = RunMetadata {
        agent: config.agent.name(),
        env: config.env.name(),
        seed: config.seed,
        ppo: &ppo,
        env_config: &config.env,
    };
    let path = dir.join(RUN_FILE);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::parse("run metadata", e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Write `metrics.csv` and `metrics.json` into `dir`.
pub fn save_metrics(dir: &Path, series: &MetricsSeries) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    series.save_csv(&dir.join(METRICS_CSV))?;
    series.save_json(&dir.join(METRICS_JSON))
}
