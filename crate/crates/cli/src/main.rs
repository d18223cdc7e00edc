use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pocar::graph::{girvan_newman_bisect, node_betweenness, Graph};
use pocar::harness::experiments::{write_summary, SUITES};
use pocar::harness::{
    run_eval, run_suite, run_training, save_metrics, save_training, ActionMode, AgentKind, Budget,
    ExperimentConfig, Suite,
};
use pocar::nn::MlpNetwork;

#[derive(Parser)]
#[command(name = "pocar", version, about = "Fairness-aware policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sample,
    Argmax,
}

#[derive(Subcommand)]
enum Command {
    /// Train a PPO agent and write checkpoints plus a training log.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's agent.
        #[arg(long)]
        agent: Option<String>,
    },
    /// Evaluate an agent over several trials and export metrics.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Policy checkpoint; required for PPO agents.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        agent: Option<String>,
        /// First trial seed; trial i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Split a graph into two communities and write them as JSON.
    Communities {
        /// Edge list with one "u v" pair per line.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every agent of a named experiment suite.
    Bench {
        #[arg(long)]
        suite: String,
        /// Number of training seeds for PPO agents.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = "desk")]
        budget: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, agent: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(name) = agent {
        cfg.agent = AgentKind::parse(name)?;
        cfg.validate()?;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct CommunityReport {
    num_nodes: usize,
    num_edges: usize,
    labels: Vec<usize>,
    communities: Vec<Vec<usize>>,
    removed_edges: Vec<(usize, usize)>,
    node_betweenness: Vec<f64>,
}

fn communities(graph_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(graph_path).with_context(|| format!("reading {}", graph_path.display()))?;
    let graph = Graph::parse_edge_list(&text)?;
    let bisection = girvan_newman_bisect(&graph);
    let report = CommunityReport {
        num_nodes: graph.num_nodes(),
        num_edges: graph.num_edges(),
        communities: bisection.members(),
        labels: bisection.labels.clone(),
        removed_edges: bisection.removed.clone(),
        node_betweenness: node_betweenness(&graph),
    };
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            agent,
        } => {
            let mut cfg = load_config(&config, agent.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let trained = run_training(&cfg)?;
            save_training(&out, &cfg, &trained)?;
            if let Some(last) = trained.log.rows.last() {
                println!(
                    "trained {} on {} for {} iterations: mean reward {:.4}, mean delta {:.4}",
                    cfg.agent,
                    cfg.env.name(),
                    trained.log.rows.len(),
                    last.mean_reward,
                    last.mean_delta
                );
            }
        }
        Command::Eval {
            config,
            checkpoint,
            trials,
            out,
            agent,
            seed,
            mode,
        } => {
            let mut cfg = load_config(&config, agent.as_deref())?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = match m {
                    Mode::Sample => ActionMode::Sample,
                    Mode::Argmax => ActionMode::Argmax,
                };
            }
            let policy = match &checkpoint {
                Some(path) => Some(MlpNetwork::load(path)?),
                None if cfg.agent.is_ppo() => bail!("agent `{}` needs --checkpoint", cfg.agent),
                None => None,
            };
            let series = run_eval(&cfg, policy.as_ref())?;
            save_metrics(&out, &series)?;
            println!(
                "{} on {}: {} trials, mean cumulative reward {:.4}, mean delta {:.4}",
                cfg.agent,
                cfg.env.name(),
                series.num_trials(),
                series.mean_cumulative_reward(),
                series.mean_delta()
            );
        }
        Command::Communities { graph, out } => communities(&graph, &out)?,
        Command::Bench {
            suite,
            seeds,
            budget,
            out,
        } => {
            let suite = Suite::named(&suite).with_context(|| format!("suites: {}", SUITES.join(", ")))?;
            let budget = Budget::parse(&budget)?;
            let seeds: Vec<u64> = (0..seeds).collect();
            let runs = run_suite(&suite, &seeds, budget, out.as_deref())?;
            write_summary(&runs, std::io::stdout().lock())?;
            if let Some(dir) = &out {
                let path = dir.join("summary.csv");
                let file = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                write_summary(&runs, file)?;
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
