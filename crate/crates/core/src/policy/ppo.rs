//! Clipped-surrogate policy optimization with optional fairness shaping.
//!
//! Each iteration collects `E` episodes of `T` steps with the current policy,
//! recording `Δ(s_t)` and `Δ(s_{t+1})` alongside every transition. Returns
//! and advantages are computed per episode; the fairness mode then decides
//! how `Δ` enters the update:
//!
//! * `Greedy` ignores it.
//! * `RewardPenalty` subtracts `ζ max(0, Δ_t - ω)` from each reward at
//!   collection time.
//! * `AdvantageRegularized` rewrites each minibatch's advantages with
//!   [`regularize_batch`].
//!
//! Policy and value networks are then updated over several epochs of
//! shuffled minibatches.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::buffer::{AdvantageMethod, RolloutBuffer, Transition};
use super::regularizer::{regularize_batch, standardize, RegularizerConfig, DEFAULT_OMEGA};
use crate::env::{Environment, SimRng};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, GradientSet, Head, MlpNetwork, Optimizer, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FairnessMode {
    Greedy,
    RewardPenalty { zeta: f64, omega: f64 },
    AdvantageRegularized(RegularizerConfig),
}

impl FairnessMode {
    pub fn reward_penalty(zeta: f64) -> Self {
        FairnessMode::RewardPenalty {
            zeta,
            omega: DEFAULT_OMEGA,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FairnessMode::Greedy => Ok(()),
            FairnessMode::RewardPenalty { zeta, omega } => {
                if !(zeta.is_finite() && *zeta >= 0.0 && omega.is_finite() && *omega >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "reward penalty needs zeta >= 0 and omega >= 0 (got {zeta}, {omega})"
                    )));
                }
                Ok(())
            }
            FairnessMode::AdvantageRegularized(cfg) => cfg.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_epsilon: f64,
    pub policy_step: f64,
    pub value_step: f64,
    pub episodes_per_iteration: usize,
    /// Steps per episode; the environment's own horizon when unset.
    pub horizon: Option<usize>,
    pub iterations: usize,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub fairness: FairnessMode,
    pub advantage: AdvantageMethod,
    /// Zero-mean, unit-variance advantages per minibatch. Skipped when the
    /// regularizer min-max normalizes its terms.
    pub standardize_advantages: bool,
    pub hidden_sizes: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub max_grad_norm: Option<f64>,
    pub entropy_coef: f64,
    /// Training halts when the mean absolute policy logit exceeds this.
    pub logit_bound: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip_epsilon: 0.2,
            policy_step: 3e-4,
            value_step: 1e-3,
            episodes_per_iteration: 8,
            horizon: None,
            iterations: 100,
            update_epochs: 4,
            minibatch_size: 256,
            fairness: FairnessMode::Greedy,
            advantage: AdvantageMethod::ReturnsMinusBaseline,
            standardize_advantages: true,
            hidden_sizes: vec![64, 64],
            optimizer: OptimizerKind::Adam,
            max_grad_norm: Some(0.5),
            entropy_coef: 0.0,
            logit_bound: 1e3,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma = {} must lie in (0, 1]", self.gamma));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad(format!("clip_epsilon = {} must lie in (0, 1)", self.clip_epsilon));
        }
        if !(self.policy_step > 0.0 && self.value_step > 0.0) {
            return bad("step sizes must be positive".into());
        }
        if self.episodes_per_iteration == 0 || self.update_epochs == 0 || self.minibatch_size == 0 {
            return bad("episodes, epochs and minibatch size must be positive".into());
        }
        if self.horizon == Some(0) {
            return bad("horizon must be at least 1".into());
        }
        if let AdvantageMethod::Gae { lambda } = self.advantage {
            if !(0.0..=1.0).contains(&lambda) {
                return bad(format!("gae lambda = {lambda} must lie in [0, 1]"));
            }
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return bad("hidden layer sizes must be positive".into());
        }
        self.fairness.validate()
    }

    fn steps_per_episode<E: Environment>(&self, env: &E) -> usize {
        self.horizon.unwrap_or_else(|| env.horizon())
    }

    fn normalizes_terms(&self) -> bool {
        matches!(self.fairness, FairnessMode::AdvantageRegularized(cfg) if cfg.normalize)
    }
}

/// RNG for one episode: a seed plus a stream index, so episodes can be
/// simulated in any order without changing their randomness.
pub fn episode_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn rollout_stream(iteration: usize, episode: usize) -> u64 {
    ((iteration as u64) << 24) | episode as u64
}

const TRAINER_STREAM: u64 = u64::MAX;

fn run_episode<E: Environment>(
    template: &E,
    policy: &MlpNetwork,
    config: &PpoConfig,
    rng: &mut SimRng,
    episode: usize,
) -> Result<Vec<Transition>> {
    let mut env = template.clone();
    env.reset(rng);
    let steps = config.steps_per_episode(&env);
    let mut out = Vec::with_capacity(steps);
    let mut obs = env.observe();
    for t in 0..steps {
        let (probs, cache) = policy.forward(&obs)?;
        let action = env.sample_action(&probs, rng);
        let log_prob_behavior = action.log_prob(&log_softmax(cache.logits()))?;
        let delta_t = env.fairness_delta();
        let env_reward = env.step(&action, rng).map_err(|e| Error::EnvStep {
            episode,
            t,
            source: Box::new(e),
        })?;
        let delta_next = env.fairness_delta();
        let reward = match config.fairness {
            FairnessMode::RewardPenalty { zeta, omega } => {
                env_reward - zeta * (delta_t - omega).max(0.0)
            }
            _ => env_reward,
        };
        let next_obs = env.observe();
        out.push(Transition {
            state_obs: std::mem::replace(&mut obs, next_obs.clone()),
            action,
            reward,
            env_reward,
            next_state_obs: next_obs,
            log_prob_behavior,
            delta_t,
            delta_next,
            terminal: t + 1 == steps,
        });
    }
    Ok(out)
}

/// Collect `E` episodes with actions sampled from `policy`. Episodes run in
/// parallel; each has its own RNG stream derived from `(seed, iteration,
/// episode)`, and results are merged in episode order.
pub fn collect_rollouts<E: Environment>(
    env: &E,
    policy: &MlpNetwork,
    config: &PpoConfig,
    seed: u64,
    iteration: usize,
) -> Result<RolloutBuffer> {
    if policy.head() != Head::SoftmaxPolicy || policy.output_dim() != env.num_actions() {
        return Err(Error::Shape {
            context: "policy head vs action space",
            expected: env.num_actions(),
            found: policy.output_dim(),
        });
    }
    let episodes = (0..config.episodes_per_iteration)
        .into_par_iter()
        .map(|e| {
            let mut rng = episode_rng(seed, rollout_stream(iteration, e));
            run_episode(env, policy, config, &mut rng, e)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buffer = RolloutBuffer::new();
    for ep in episodes {
        buffer.push_episode(ep);
    }
    Ok(buffer)
}

/// `min(R A, clip(R, 1 - ε, 1 + ε) A)`.
pub fn clipped_contribution(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone)]
pub struct ClipLoss {
    /// Mean clipped surrogate over the samples that were used.
    pub objective: f64,
    /// Ascent direction of `objective + entropy_coef * entropy`.
    pub gradients: GradientSet,
    pub entropy: f64,
    pub skipped: usize,
    pub clip_fraction: f64,
    pub mean_abs_logit: f64,
}

pub fn ppo_clip_loss(
    policy: &MlpNetwork,
    batch: &[&Transition],
    advantages: &[f64],
    epsilon: f64,
    entropy_coef: f64,
) -> Result<ClipLoss> {
    if batch.len() != advantages.len() {
        return Err(Error::Shape {
            context: "advantages per minibatch",
            expected: batch.len(),
            found: advantages.len(),
        });
    }
    let mut gradients = GradientSet::zeros_like(policy);
    let mut objective = 0.0;
    let mut entropy = 0.0;
    let mut clipped = 0usize;
    let mut used = 0usize;
    let mut abs_logit = 0.0;
    for (tr, &adv) in batch.iter().zip(advantages) {
        let (probs, cache) = policy.forward(&tr.state_obs)?;
        let log_probs = log_softmax(cache.logits());
        let ratio = (tr.action.log_prob(&log_probs)? - tr.log_prob_behavior).exp();
        if !ratio.is_finite() {
            log::warn!("skipping transition with non-finite probability ratio");
            continue;
        }
        used += 1;
        abs_logit += cache.logits().iter().map(|z| z.abs()).sum::<f64>() / probs.len() as f64;
        let unclipped = ratio * adv;
        let contribution = clipped_contribution(ratio, adv, epsilon);
        objective += contribution;
        let mut grad_logits = vec![0.0; probs.len()];
        if unclipped <= contribution {
            let dlogp = tr.action.log_prob_logit_gradient(&probs);
            grad_logits
                .iter_mut()
                .zip(&dlogp)
                .for_each(|(g, d)| *g += unclipped * d);
        } else {
            clipped += 1;
        }
        let h: f64 = -probs
            .iter()
            .zip(&log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, lp)| p * lp)
            .sum::<f64>();
        entropy += h;
        if entropy_coef != 0.0 {
            for ((g, p), lp) in grad_logits.iter_mut().zip(&probs).zip(&log_probs) {
                *g -= entropy_coef * p * (lp + h);
            }
        }
        if grad_logits.iter().any(|g| *g != 0.0) {
            policy.accumulate_logit_gradient(&cache, &grad_logits, &mut gradients)?;
        }
    }
    let n = used.max(1) as f64;
    gradients.scale(1.0 / n);
    Ok(ClipLoss {
        objective: objective / n,
        gradients,
        entropy: entropy / n,
        skipped: batch.len() - used,
        clip_fraction: clipped as f64 / n,
        mean_abs_logit: abs_logit / n,
    })
}

/// Mean squared error `mean (V(s) - G)^2` and its gradient (descend on it).
pub fn value_loss(
    value_net: &MlpNetwork,
    observations: &[&[f64]],
    targets: &[f64],
) -> Result<(f64, GradientSet)> {
    if observations.len() != targets.len() {
        return Err(Error::Shape {
            context: "value targets",
            expected: observations.len(),
            found: targets.len(),
        });
    }
    let n = observations.len().max(1) as f64;
    let mut grads = GradientSet::zeros_like(value_net);
    let mut loss = 0.0;
    for (obs, &target) in observations.iter().zip(targets) {
        let (out, cache) = value_net.forward(obs)?;
        let err = out[0] - target;
        loss += err * err;
        value_net.accumulate_logit_gradient(&cache, &[2.0 * err / n], &mut grads)?;
    }
    Ok((loss / n, grads))
}

/// Per-iteration training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean environment reward per step (before any fairness penalty).
    pub mean_reward: f64,
    /// Mean `Δ(s_{t+1})` over the collected steps.
    pub mean_delta: f64,
    /// Mean clipped objective over the last epoch's minibatches.
    pub objective: f64,
    pub value_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<IterationLog>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "iteration,mean_reward,mean_delta,objective,value_loss";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.mean_reward, r.mean_delta, r.objective, r.value_loss
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub policy: MlpNetwork,
    pub value: MlpNetwork,
    pub log: TrainingLog,
}

fn network_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}

/// Fresh policy and value networks for an environment.
pub fn init_networks<E: Environment>(env: &E, config: &PpoConfig, rng: &mut SimRng) -> Result<(MlpNetwork, MlpNetwork)> {
    let obs = env.observation_dim();
    let policy = MlpNetwork::new(
        &network_sizes(obs, &config.hidden_sizes, env.num_actions()),
        Head::SoftmaxPolicy,
        rng,
    )?;
    let value = MlpNetwork::new(&network_sizes(obs, &config.hidden_sizes, 1), Head::ScalarValue, rng)?;
    Ok((policy, value))
}

fn minibatch_advantages(config: &PpoConfig, batch: &[&Transition], raw: Vec<f64>) -> Vec<f64> {
    let mut adv = raw;
    if config.standardize_advantages && !config.normalizes_terms() {
        standardize(&mut adv);
    }
    match &config.fairness {
        FairnessMode::AdvantageRegularized(cfg) => {
            let dt: Vec<f64> = batch.iter().map(|t| t.delta_t).collect();
            let dn: Vec<f64> = batch.iter().map(|t| t.delta_next).collect();
            regularize_batch(&adv, &dt, &dn, cfg)
        }
        _ => adv,
    }
}

/// Run the full optimization loop.
pub fn train<E: Environment>(env: &E, config: &PpoConfig, seed: u64) -> Result<TrainedAgent> {
    config.validate()?;
    let batch_size = config.episodes_per_iteration * config.steps_per_episode(env);
    if config.minibatch_size > batch_size {
        return Err(Error::InvalidConfig(format!(
            "minibatch size {} exceeds the {batch_size} transitions collected per iteration",
            config.minibatch_size
        )));
    }
    let mut rng = episode_rng(seed, TRAINER_STREAM);
    let (mut policy, mut value) = init_networks(env, config, &mut rng)?;
    let mut policy_opt = Optimizer::new(config.optimizer, &policy);
    let mut value_opt = Optimizer::new(config.optimizer, &value);
    let mut log = TrainingLog::default();

    for iteration in 0..config.iterations {
        let mut buffer = collect_rollouts(env, &policy, config, seed, iteration)?;
        buffer.compute_returns(config.gamma);
        buffer.estimate_advantages(&value, config.advantage, config.gamma)?;

        let mut indices: Vec<usize> = (0..buffer.len()).collect();
        let mut epoch_objective = 0.0;
        let mut epoch_value_loss = 0.0;
        let mut epoch_abs_logit = 0.0;
        for _ in 0..config.update_epochs {
            indices.shuffle(&mut rng);
            epoch_objective = 0.0;
            epoch_value_loss = 0.0;
            epoch_abs_logit = 0.0;
            let mut minibatches = 0;
            for chunk in indices.chunks(config.minibatch_size) {
                let batch: Vec<&Transition> = chunk.iter().map(|&i| &buffer.transitions()[i]).collect();
                let raw: Vec<f64> = chunk.iter().map(|&i| buffer.advantages()[i]).collect();
                let adv = minibatch_advantages(config, &batch, raw);

                let mut clip = ppo_clip_loss(&policy, &batch, &adv, config.clip_epsilon, config.entropy_coef)?;
                if let Some(max) = config.max_grad_norm {
                    clip.gradients.clip_norm(max);
                }
                policy_opt.ascend(&mut policy, &clip.gradients, config.policy_step)?;

                let obs: Vec<&[f64]> = batch.iter().map(|t| t.state_obs.as_slice()).collect();
                let targets: Vec<f64> = chunk.iter().map(|&i| buffer.returns()[i]).collect();
                let (vloss, mut vgrad) = value_loss(&value, &obs, &targets)?;
                vgrad.scale(-1.0);
                if let Some(max) = config.max_grad_norm {
                    vgrad.clip_norm(max);
                }
                value_opt.ascend(&mut value, &vgrad, config.value_step)?;

                epoch_objective += clip.objective;
                epoch_value_loss += vloss;
                epoch_abs_logit += clip.mean_abs_logit;
                minibatches += 1;
            }
            let m = minibatches as f64;
            epoch_objective /= m;
            epoch_value_loss /= m;
            epoch_abs_logit /= m;
        }
        if !(epoch_abs_logit <= config.logit_bound) {
            return Err(Error::Diverged {
                iteration,
                mean_abs_logit: epoch_abs_logit,
                bound: config.logit_bound,
            });
        }

        let n = buffer.len() as f64;
        let row = IterationLog {
            iteration,
            mean_reward: buffer.transitions().iter().map(|t| t.env_reward).sum::<f64>() / n,
            mean_delta: buffer.transitions().iter().map(|t| t.delta_next).sum::<f64>() / n,
            objective: epoch_objective,
            value_loss: epoch_value_loss,
        };
        log::debug!(
            "iter {} reward {:.4} delta {:.4} objective {:.4} value_loss {:.4}",
            row.iteration,
            row.mean_reward,
            row.mean_delta,
            row.objective,
            row.value_loss
        );
        log.rows.push(row);
    }
    Ok(TrainedAgent { policy, value, log })
}
