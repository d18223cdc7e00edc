//! Experiment orchestration: configuration, training runs, evaluation and
//! metric export.

pub mod config;
pub mod eval;
pub mod experiments;
pub mod metrics;

pub use config::{
    ActionMode, AgentKind, BaselineParams, EnvInstance, EnvSpec, ExperimentConfig, FairnessOverrides,
};
pub use eval::{run_eval, run_trials, run_training, save_metrics, save_training, Actor, PolicyActor};
pub use experiments::{run_suite, train_and_evaluate, Budget, Suite, SuiteRun, EVAL_SEED_BASE};
pub use metrics::{recompute_delta, Aggregate, MetricsSeries, TrialSeries};
