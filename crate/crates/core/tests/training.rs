use rand::SeedableRng;

use pocar::env::{Action, AttentionConfig, AttentionEnv, BanditConfig, BanditEnv, Environment, SimRng};
use pocar::harness::{AgentKind, EnvSpec, ExperimentConfig};
use pocar::nn::{Head, MlpNetwork, Optimizer, OptimizerKind};
use pocar::policy::{
    collect_rollouts, ppo_clip_loss, train, value_loss, FairnessMode, PpoConfig, RegularizerConfig, Transition,
};

fn bandit_config(agent: AgentKind) -> PpoConfig {
    ExperimentConfig::new(EnvSpec::Bandit(BanditConfig::default()), agent)
        .ppo_config()
        .unwrap()
}

fn arm_zero_probability(policy: &MlpNetwork) -> f64 {
    policy.predict(&[1.0]).unwrap()[0]
}

#[test]
fn bandit_converges_on_every_seed() {
    let env = BanditEnv::new(BanditConfig::default()).unwrap();
    let mut cfg = bandit_config(AgentKind::APpo);
    assert!(cfg.iterations <= 200);
    // the bandit never violates fairness, so every term beyond the advantage is idle
    cfg.fairness = FairnessMode::AdvantageRegularized(RegularizerConfig {
        beta0: 1.0,
        beta1: 0.5,
        beta2: 0.5,
        ..RegularizerConfig::identity()
    });
    for seed in 0..5 {
        let trained = train(&env, &cfg, seed).unwrap();
        let p = arm_zero_probability(&trained.policy);
        assert!(p > 0.95, "seed {seed}: pi(arm 0) = {p}");
    }
}

fn small_attention() -> AttentionEnv {
    AttentionEnv::new(AttentionConfig {
        horizon: 30,
        ..AttentionConfig::default()
    })
    .unwrap()
}

fn small_ppo(fairness: FairnessMode) -> PpoConfig {
    PpoConfig {
        iterations: 4,
        episodes_per_iteration: 3,
        minibatch_size: 32,
        hidden_sizes: vec![8],
        fairness,
        ..PpoConfig::default()
    }
}

#[test]
fn greedy_equals_unit_regularizer() {
    let env = small_attention();
    let greedy = train(&env, &small_ppo(FairnessMode::Greedy), 9).unwrap();
    let unit = train(
        &env,
        &small_ppo(FairnessMode::AdvantageRegularized(RegularizerConfig::identity())),
        9,
    )
    .unwrap();
    assert!(greedy.policy.same_parameters(&unit.policy));
    assert!(greedy.value.same_parameters(&unit.value));
    assert_eq!(greedy.log, unit.log);
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let env = small_attention();
    let cfg = small_ppo(FairnessMode::reward_penalty(10.0));
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&env, &cfg, 3).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.policy.same_parameters(&b.policy));
    assert_eq!(a.log, b.log);
    let other = train(&env, &cfg, 4).unwrap();
    assert!(!a.policy.same_parameters(&other.policy));
}

#[test]
fn positive_advantage_raises_the_taken_action() {
    let mut rng = SimRng::seed_from_u64(0);
    let mut policy = MlpNetwork::new(&[1, 4, 2], Head::SoftmaxPolicy, &mut rng).unwrap();
    let before = arm_zero_probability(&policy);
    let lp = policy.forward(&[1.0]).unwrap().1.logits().to_vec();
    let log_prob = pocar::nn::log_softmax(&lp)[0];
    let t = Transition {
        state_obs: vec![1.0],
        action: Action::Discrete(0),
        reward: 1.0,
        env_reward: 1.0,
        next_state_obs: vec![1.0],
        log_prob_behavior: log_prob,
        delta_t: 0.0,
        delta_next: 0.0,
        terminal: true,
    };
    let loss = ppo_clip_loss(&policy, &[&t], &[1.0], 0.2, 0.0).unwrap();
    policy.apply_update(&loss.gradients, 0.1).unwrap();
    assert!(arm_zero_probability(&policy) > before);
}

#[test]
fn value_regression_converges() {
    let mut rng = SimRng::seed_from_u64(1);
    let mut net = MlpNetwork::new(&[2, 16, 1], Head::ScalarValue, &mut rng).unwrap();
    let xs: Vec<Vec<f64>> = (0..16).map(|i| vec![(i % 4) as f64 / 3.0, (i / 4) as f64 / 3.0]).collect();
    let obs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let targets: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] - x[1] + 0.5).collect();
    let mut opt = Optimizer::new(OptimizerKind::Adam, &net);
    let initial = value_loss(&net, &obs, &targets).unwrap().0;
    for _ in 0..500 {
        let (_, mut g) = value_loss(&net, &obs, &targets).unwrap();
        g.scale(-1.0);
        opt.ascend(&mut net, &g, 1e-2).unwrap();
    }
    let last = value_loss(&net, &obs, &targets).unwrap().0;
    assert!(last < 0.1 * initial, "loss {initial} -> {last}");
}

#[test]
fn rollout_size_is_episodes_times_horizon() {
    let env = small_attention();
    let mut rng = SimRng::seed_from_u64(2);
    let policy = MlpNetwork::new(&[env.observation_dim(), env.num_actions()], Head::SoftmaxPolicy, &mut rng).unwrap();
    let cfg = PpoConfig {
        episodes_per_iteration: 1,
        horizon: Some(3),
        ..PpoConfig::default()
    };
    let buf = collect_rollouts(&env, &policy, &cfg, 0, 0).unwrap();
    assert_eq!(buf.len(), 3);
    assert_eq!(buf.episodes().len(), 1);
    assert!(buf.transitions()[2].terminal && !buf.transitions()[1].terminal);
    let again = collect_rollouts(&env, &policy, &cfg, 0, 0).unwrap();
    assert_eq!(buf.transitions(), again.transitions());
}

#[test]
fn reward_penalty_charges_violation_above_tolerance() {
    let env = small_attention();
    let mut rng = SimRng::seed_from_u64(3);
    let policy = MlpNetwork::new(&[env.observation_dim(), env.num_actions()], Head::SoftmaxPolicy, &mut rng).unwrap();
    let cfg = PpoConfig {
        episodes_per_iteration: 2,
        fairness: FairnessMode::RewardPenalty { zeta: 3.0, omega: 0.05 },
        ..PpoConfig::default()
    };
    let buf = collect_rollouts(&env, &policy, &cfg, 5, 1).unwrap();
    for t in buf.transitions() {
        let expected = t.env_reward - 3.0 * (t.delta_t - 0.05).max(0.0);
        assert!((t.reward - expected).abs() < 1e-12);
    }
}
