pub mod buffer;
pub mod ppo;
pub mod regularizer;

pub use buffer::{AdvantageMethod, RolloutBuffer, Transition};
pub use ppo::{
    clipped_contribution, collect_rollouts, episode_rng, init_networks, ppo_clip_loss, train,
    value_loss, ClipLoss, FairnessMode, IterationLog, PpoConfig, TrainedAgent, TrainingLog,
};
pub use regularizer::{
    min_max_normalize, regularization_terms, regularize_advantage, regularize_batch, standardize,
    RegularizerConfig, DEFAULT_OMEGA,
};
