//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Learning criteria train at the desk budget on seeds 0..5 and evaluate on
//! the shared trial seeds, so the whole suite runs in minutes on one core.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};

use pocar::env::disease::{Health, SocialGraph};
use pocar::env::{
    AttentionConfig, AttentionEnv, BanditConfig, BanditEnv, DiseaseAction, DiseaseConfig, DiseaseEnv, LendingConfig,
    LendingDecision, LendingEnv, SimRng,
};
use pocar::graph::{girvan_newman_bisect, Graph};
use pocar::harness::{train_and_evaluate, AgentKind, Budget, EnvSpec, ExperimentConfig, MetricsSeries, Suite};
use pocar::nn::{Head, MlpNetwork};
use pocar::policy::{regularize_advantage, train, RegularizerConfig};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const REQUIRED_SEEDS: usize = 3;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Written straight to the process stdout so the lines survive test capture.
fn report(id: usize, name: &str, v: &Verdict) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {id:>2} {status}: {name} ({})", v.detail).unwrap();
    out.flush().unwrap();
}

fn regularizer_table() -> Verdict {
    let cfg = RegularizerConfig {
        beta0: 0.5,
        beta1: 2.0,
        beta2: 4.0,
        omega: 0.1,
        normalize: false,
    };
    // (advantage, Δ_t, Δ_{t+1}, expected), worked by hand
    let table = [
        (1.0, 0.05, 0.02, 0.5),
        (-1.0, 0.05, 0.02, -0.5),
        (2.0, 0.08, 0.3, 1.0),
        (-2.0, 0.08, 0.3, -1.0),
        (1.0, 0.3, 0.2, 0.1),
        (-1.0, 0.3, 0.2, -0.9),
        (1.0, 0.3, 0.5, -0.7),
        (-1.0, 0.3, 0.5, -1.7),
        (1.0, 0.1, 0.6, 0.5),
        (0.0, 0.6, 0.7, -1.4),
        (3.0, 0.4, 0.4, 0.9),
        (-0.5, 0.0, 1.0, -0.25),
    ];
    let worst = table
        .iter()
        .map(|(a, d0, d1, want)| (regularize_advantage(*a, *d0, *d1, &cfg) - want).abs())
        .fold(0.0, f64::max);
    verdict(worst <= 1e-12, format!("12 cases, max error {worst:.1e}"))
}

fn finite_difference_gradients() -> Verdict {
    const H: f64 = 1e-5;
    let mut rng = SimRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for case in 0..24 {
        let head = if case % 2 == 0 { Head::SoftmaxPolicy } else { Head::ScalarValue };
        let inputs = rng.random_range(1..5);
        let hidden = rng.random_range(1..6);
        let outputs = if head == Head::ScalarValue { 1 } else { rng.random_range(2..5) };
        let mut net = MlpNetwork::new(&[inputs, hidden, outputs], head, &mut rng).unwrap();
        for l in 0..net.num_layers() {
            net.weights_mut(l).iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
            net.biases_mut(l).iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &MlpNetwork| n.predict(&x).unwrap().iter().zip(&c).map(|(o, c)| o * c).sum::<f64>();
        let (_, cache) = net.forward(&x).unwrap();
        let grads = net.backward(&cache, &c).unwrap();
        for l in 0..net.num_layers() {
            for i in 0..net.weights(l).len() {
                let (mut p, mut m) = (net.clone(), net.clone());
                p.weights_mut(l)[i] += H;
                m.weights_mut(l)[i] -= H;
                let numeric = (loss(&p) - loss(&m)) / (2.0 * H);
                let analytic = grads.weights[l][i];
                let scale = numeric.abs().max(analytic.abs());
                if scale > 1e-7 {
                    worst = worst.max((numeric - analytic).abs() / scale);
                }
            }
        }
        cases += 1;
    }
    verdict(worst <= 1e-4, format!("{cases} networks, max relative error {worst:.1e}"))
}

fn bandit_convergence() -> Verdict {
    let env = BanditEnv::new(BanditConfig::default()).unwrap();
    let mut cfg = ExperimentConfig::new(EnvSpec::Bandit(BanditConfig::default()), AgentKind::APpo);
    cfg.fairness.beta = Some([1.0, 0.5, 0.5]);
    let ppo = cfg.ppo_config().unwrap();
    let probs: Vec<f64> = SEEDS
        .iter()
        .map(|&seed| train(&env, &ppo, seed).unwrap().policy.predict(&[1.0]).unwrap()[0])
        .collect();
    let ok = ppo.iterations <= 200 && probs.iter().all(|p| *p > 0.95);
    verdict(ok, format!("{} iterations, pi(best arm) = {probs:.3?}", ppo.iterations))
}

fn within_3_sigma(observed: f64, expected: f64, sigma: f64) -> bool {
    (observed - expected).abs() <= 3.0 * sigma
}

fn stochastic_dynamics() -> Verdict {
    let mut rng = SimRng::seed_from_u64(404);
    let mut checks = Vec::new();

    let lambda = 2.0;
    let attention = AttentionEnv::new(AttentionConfig {
        sites: 2,
        units: 1,
        initial_rates: Some(vec![lambda, lambda]),
        ..AttentionConfig::default()
    })
    .unwrap();
    let mut ys = Vec::new();
    for _ in 0..50_000 {
        let mut env = attention.clone();
        ys.extend(env.step_allocation(&[0, 1], &mut rng).unwrap().occurred.iter().map(|y| *y as f64));
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    checks.push(("poisson mean", within_3_sigma(mean, lambda, (lambda / n).sqrt())));
    let var_sigma = ((lambda + 2.0 * lambda * lambda) / n).sqrt();
    checks.push(("poisson variance", within_3_sigma(var, lambda, var_sigma)));

    let mut lending = LendingEnv::new(LendingConfig::default()).unwrap();
    let mut lending_ok = true;
    for score in 1..=7 {
        let eta = lending.repayment(score);
        let trials = 10_000;
        let mut repaid = 0;
        for _ in 0..trials {
            lending.state_mut().applicant.credit_score = score;
            repaid += usize::from(lending.step_decision(LendingDecision::Reject, &mut rng).repaid);
        }
        let sigma = (eta * (1.0 - eta) / trials as f64).sqrt();
        lending_ok &= within_3_sigma(repaid as f64 / trials as f64, eta, sigma);
    }
    checks.push(("repayment vs eta", lending_ok));

    let tau = 0.5;
    let mut sir_ok = true;
    for k in 1..=3usize {
        let edges: Vec<(usize, usize)> = (1..=k).map(|v| (0, v)).collect();
        let network = SocialGraph::with_communities(Graph::from_edges(k + 1, &edges).unwrap(), vec![0; k + 1]).unwrap();
        let cfg = DiseaseConfig {
            tau,
            rho: 0.0,
            ..DiseaseConfig::default()
        };
        let mut star = DiseaseEnv::with_network(cfg, network).unwrap();
        for (v, h) in star.state_mut().health.iter_mut().enumerate() {
            *h = if v == 0 { Health::Susceptible } else { Health::Infected };
        }
        let trials = 20_000;
        let mut hits = 0;
        for _ in 0..trials {
            let mut env = star.clone();
            env.step_action(DiseaseAction::NoVaccinate, &mut rng).unwrap();
            hits += usize::from(env.state().health[0] == Health::Infected);
        }
        let p = 1.0 - (1.0 - tau).powi(k as i32);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        sir_ok &= within_3_sigma(hits as f64 / trials as f64, p, sigma);
    }
    checks.push(("infection vs 1-(1-tau)^k", sir_ok));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let detail = if failed.is_empty() {
        format!("{} checks within 3 sigma", checks.len())
    } else {
        format!("outside 3 sigma: {}", failed.join(", "))
    };
    verdict(failed.is_empty(), detail)
}

/// Girvan-Newman with betweenness from explicit shortest-path enumeration.
fn reference_split(g: &Graph) -> Vec<usize> {
    let n = g.num_nodes();
    let mut adj: Vec<Vec<usize>> = (0..n).map(|v| g.neighbors(v).to_vec()).collect();
    let components = |adj: &Vec<Vec<usize>>| {
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] == usize::MAX {
                let mut stack = vec![s];
                label[s] = next;
                while let Some(v) = stack.pop() {
                    for &w in &adj[v] {
                        if label[w] == usize::MAX {
                            label[w] = next;
                            stack.push(w);
                        }
                    }
                }
                next += 1;
            }
        }
        label
    };
    loop {
        let mut score: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, nb) in adj.iter().enumerate() {
            for &v in nb {
                if u < v {
                    score.insert((u, v), 0.0);
                }
            }
        }
        for s in 0..n {
            for t in s + 1..n {
                let mut paths = vec![vec![s]];
                let mut seen = vec![false; n];
                seen[s] = true;
                let found = loop {
                    let done: Vec<Vec<usize>> = paths.iter().filter(|p| p[p.len() - 1] == t).cloned().collect();
                    if !done.is_empty() || paths.is_empty() {
                        break done;
                    }
                    let mut next = Vec::new();
                    for p in &paths {
                        for &w in &adj[p[p.len() - 1]] {
                            if !seen[w] {
                                let mut q = p.clone();
                                q.push(w);
                                next.push(q);
                            }
                        }
                    }
                    next.iter().for_each(|p| seen[p[p.len() - 1]] = true);
                    paths = next;
                };
                for p in &found {
                    for e in p.windows(2) {
                        *score.get_mut(&(e[0].min(e[1]), e[0].max(e[1]))).unwrap() += 1.0 / found.len() as f64;
                    }
                }
            }
        }
        let best = score.values().copied().fold(f64::MIN, f64::max);
        let (&(u, v), _) = score.iter().find(|(_, s)| **s > best - 1e-9).unwrap();
        adj[u].retain(|w| *w != v);
        adj[v].retain(|w| *w != u);
        let labels = components(&adj);
        if labels.iter().any(|l| *l > 0) {
            return labels;
        }
    }
}

fn girvan_newman_karate() -> Verdict {
    let g = Graph::karate_club();
    let split = girvan_newman_bisect(&g);
    let reference = reference_split(&g);
    let sizes: Vec<usize> = split.members().iter().map(Vec::len).collect();
    verdict(split.labels == reference, format!("community sizes {sizes:?}, {} edges removed", split.removed.len()))
}

/// Evaluation series per agent; PPO agents get one entry per seed.
struct SuiteResults {
    baselines: HashMap<AgentKind, MetricsSeries>,
    ppo: HashMap<AgentKind, Vec<MetricsSeries>>,
}

fn run_agents(suite: &str, agents: &[AgentKind]) -> SuiteResults {
    let suite = Suite::named(suite).unwrap();
    let mut results = SuiteResults {
        baselines: HashMap::new(),
        ppo: HashMap::new(),
    };
    for &agent in agents {
        let cfg = suite.config(agent, Budget::Desk);
        if agent.is_ppo() {
            let runs = SEEDS
                .iter()
                .map(|&s| train_and_evaluate(&cfg, s, None).unwrap())
                .collect();
            results.ppo.insert(agent, runs);
        } else {
            results.baselines.insert(agent, train_and_evaluate(&cfg, 0, None).unwrap());
        }
    }
    results
}

fn count_seeds(test: impl Fn(usize) -> bool) -> usize {
    SEEDS.iter().filter(|&&s| test(s as usize)).count()
}

fn fmt(values: impl Iterator<Item = f64>) -> String {
    let v: Vec<String> = values.map(|x| format!("{x:.3}")).collect();
    format!("[{}]", v.join(", "))
}

fn attention_base() -> Verdict {
    use AgentKind::*;
    let r = run_agents("attention", &[PurelyGreedy, GPpo, RPpo, APpo]);
    let greedy = r.baselines[&PurelyGreedy].mean_cumulative_reward();
    let beats_greedy = |s: usize| [GPpo, RPpo, APpo].iter().all(|a| r.ppo[a][s].mean_cumulative_reward() >= greedy);
    let fairer = |s: usize| r.ppo[&APpo][s].mean_delta() < r.ppo[&GPpo][s].mean_delta();
    let n_reward = count_seeds(beats_greedy);
    let n_fair = count_seeds(fairer);
    let detail = format!(
        "greedy reward {greedy:.1}; all PPO >= greedy on {n_reward}/5 seeds; A-PPO delta {} vs G-PPO {} ({n_fair}/5)",
        fmt(r.ppo[&APpo].iter().map(MetricsSeries::mean_delta)),
        fmt(r.ppo[&GPpo].iter().map(MetricsSeries::mean_delta)),
    );
    verdict(n_reward >= REQUIRED_SEEDS && n_fair >= REQUIRED_SEEDS, detail)
}

fn attention_hard() -> Verdict {
    use AgentKind::*;
    let r = run_agents("attention-hard", &[PurelyGreedy, RPpo, APpo]);
    let initial = {
        let rates = AttentionConfig::harder().starting_rates();
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    let final_rate = |s: &MetricsSeries| s.extra("mean_rate").unwrap().last();
    let greedy_rate = final_rate(&r.baselines[&PurelyGreedy]);
    let n_contained = count_seeds(|s| final_rate(&r.ppo[&APpo][s]) < initial);
    let n_fair = count_seeds(|s| r.ppo[&APpo][s].mean_delta() <= r.ppo[&RPpo][s].mean_delta());
    let detail = format!(
        "initial rate {initial:.2}; greedy final {greedy_rate:.2}; A-PPO final {} ({n_contained}/5 below); A-PPO delta {} vs R-PPO {} ({n_fair}/5)",
        fmt(r.ppo[&APpo].iter().map(final_rate)),
        fmt(r.ppo[&APpo].iter().map(MetricsSeries::mean_delta)),
        fmt(r.ppo[&RPpo].iter().map(MetricsSeries::mean_delta)),
    );
    verdict(
        greedy_rate > 2.0 * initial && n_contained >= REQUIRED_SEEDS && n_fair >= REQUIRED_SEEDS,
        detail,
    )
}

fn lending() -> Verdict {
    use AgentKind::*;
    let r = run_agents("lending", &[GPpo, APpo]);
    let cash = |s: &MetricsSeries| s.extra("bank_cash").unwrap().last();
    let ok = |s: usize| {
        let a = &r.ppo[&APpo][s];
        a.mean_delta() < r.ppo[&GPpo][s].mean_delta() && cash(a) > 0.0
    };
    let n = count_seeds(ok);
    let detail = format!(
        "A-PPO delta {} vs G-PPO {}; A-PPO cash {} ({n}/5 fairer and profitable)",
        fmt(r.ppo[&APpo].iter().map(MetricsSeries::mean_delta)),
        fmt(r.ppo[&GPpo].iter().map(MetricsSeries::mean_delta)),
        fmt(r.ppo[&APpo].iter().map(cash)),
    );
    verdict(n >= REQUIRED_SEEDS, detail)
}

fn disease() -> Verdict {
    use AgentKind::*;
    let r = run_agents("disease", &[Random, MaxNeighbor, RPpo, APpo]);
    let random = &r.baselines[&Random];
    let max_nb = &r.baselines[&MaxNeighbor];
    let q = max_nb.horizon / 4;
    let (first, last) = (
        max_nb.mean_delta_between(0, q),
        max_nb.mean_delta_between(max_nb.horizon - q, max_nb.horizon),
    );
    let rising = first < last;
    let below_random = |a: AgentKind| count_seeds(|s| r.ppo[&a][s].final_delta() < random.final_delta());
    let (n_a, n_r) = (below_random(APpo), below_random(RPpo));
    let ordered = random.mean_delta() < max_nb.mean_delta();
    let detail = format!(
        "max-neighbor quarters {first:.3} -> {last:.3}; random final {:.3}; A-PPO final {} ({n_a}/5); R-PPO final {} ({n_r}/5); mean delta random {:.3} < max-neighbor {:.3}",
        random.final_delta(),
        fmt(r.ppo[&APpo].iter().map(MetricsSeries::final_delta)),
        fmt(r.ppo[&RPpo].iter().map(MetricsSeries::final_delta)),
        random.mean_delta(),
        max_nb.mean_delta(),
    );
    verdict(
        rising && n_a >= REQUIRED_SEEDS && n_r >= REQUIRED_SEEDS && ordered,
        detail,
    )
}

fn cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "agent = \"r_ppo\"\nseed = 11\ntrials = 4\n\n[env]\nkind = \"lending\"\nhorizon = 100\n\n[ppo]\niterations = 4\nhidden_sizes = [16]\nminibatch_size = 100\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_pocar"))
            .args(args)
            .output()
            .unwrap()
            .status
            .success()
    };
    let p = |path: &Path| path.to_str().unwrap().to_string();
    let mut identical = true;
    let mut compared = 0;
    let outs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        assert!(run(&["train", "--config", &p(&cfg), "--out", &p(out)]));
        let ckpt = out.join("policy.ckpt");
        assert!(run(&["eval", "--config", &p(&cfg), "--checkpoint", &p(&ckpt), "--out", &p(&out.join("eval"))]));
        assert!(run(&["eval", "--config", &p(&cfg), "--agent", "eo", "--out", &p(&out.join("eo"))]));
    }
    for file in ["train_log.csv", "eval/metrics.csv", "eo/metrics.csv", "policy.ckpt"] {
        let a = std::fs::read(outs[0].join(file)).unwrap();
        let b = std::fs::read(outs[1].join(file)).unwrap();
        identical &= a == b;
        compared += 1;
    }
    verdict(identical, format!("{compared} output files compared byte for byte"))
}

#[test]
fn acceptance_criteria() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check); 10] = [
        ("regularized advantage table", regularizer_table),
        ("analytic vs finite-difference gradients", finite_difference_gradients),
        ("bandit convergence", bandit_convergence),
        ("stochastic dynamics", stochastic_dynamics),
        ("Girvan-Newman on the karate club", girvan_newman_karate),
        ("attention, 5 sites", attention_base),
        ("attention, 10 sites", attention_hard),
        ("lending", lending),
        ("disease control", disease),
        ("train and eval determinism", cli_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        report(i + 1, name, &v);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
