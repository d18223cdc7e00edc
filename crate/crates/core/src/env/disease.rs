//! Precision disease control on a social network.
//!
//! Nodes are susceptible, infected or recovered. Each step the agent may
//! vaccinate one node, after which infection spreads from the infected set at
//! the start of the step: a susceptible node with `k` infected neighbours
//! falls ill with probability `1 - (1 - τ)^k`. Nodes that were already
//! infected recover with probability `ρ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{max_pairwise_gap, Action, Environment, SimRng};
use crate::error::{Error, Result};
use crate::graph::{girvan_newman_bisect, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Health {
    Susceptible,
    Infected,
    Recovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiseaseAction {
    Vaccinate(usize),
    NoVaccinate,
}

/// How the first infected node is chosen at reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialInfection {
    /// Highest degree, lowest index on ties.
    MaxDegree,
    Random,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiseaseConfig {
    pub tau: f64,
    pub rho: f64,
    pub zeta0: f64,
    pub horizon: usize,
    pub burn_in: usize,
    pub initial_infection: InitialInfection,
    /// Edge-list file; the karate club network when absent.
    pub graph: Option<String>,
}

impl Default for DiseaseConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            rho: 0.005,
            zeta0: 1.0,
            horizon: 20,
            burn_in: 1,
            initial_infection: InitialInfection::MaxDegree,
            graph: None,
        }
    }
}

impl DiseaseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("tau", self.tau), ("rho", self.rho)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<Graph> {
        match &self.graph {
            None => Ok(Graph::karate_club()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Graph::parse_edge_list(&text)
            }
        }
    }
}

/// A contact network with community labels.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    pub graph: Graph,
    pub communities: Vec<usize>,
    pub num_communities: usize,
}

impl SocialGraph {
    /// Label communities with one Girvan-Newman bisection.
    pub fn bisected(graph: Graph) -> Self {
        let split = girvan_newman_bisect(&graph);
        let num_communities = split.num_communities();
        Self {
            graph,
            communities: split.labels,
            num_communities,
        }
    }

    pub fn with_communities(graph: Graph, communities: Vec<usize>) -> Result<Self> {
        if communities.len() != graph.num_nodes() {
            return Err(Error::Shape {
                context: "community labels",
                expected: graph.num_nodes(),
                found: communities.len(),
            });
        }
        let num_communities = communities.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            graph,
            communities,
            num_communities,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HealthState {
    pub health: Vec<Health>,
    pub vaccinations: Vec<u64>,
    pub newly_infected: Vec<u64>,
    pub t: usize,
}

/// `Δ = max_{c,c'} |vacc_c/(newinf_c+1) - vacc_c'/(newinf_c'+1)|`.
pub fn fairness_from_accumulators(vaccinations: &[f64], newly_infected: &[f64]) -> f64 {
    let ratios: Vec<f64> = vaccinations
        .iter()
        .zip(newly_infected)
        .map(|(v, n)| v / (n + 1.0))
        .collect();
    max_pairwise_gap(&ratios)
}

pub fn infection_probability(tau: f64, infected_neighbors: usize) -> f64 {
    1.0 - (1.0 - tau).powi(infected_neighbors as i32)
}

#[derive(Debug, Clone)]
pub struct DiseaseEnv {
    config: DiseaseConfig,
    network: SocialGraph,
    state: HealthState,
}

impl DiseaseEnv {
    /// Build on the configured graph, splitting it into two communities.
    pub fn new(config: DiseaseConfig) -> Result<Self> {
        config.validate()?;
        let graph = config.load_graph()?;
        Self::with_network(config, SocialGraph::bisected(graph))
    }

    pub fn with_network(config: DiseaseConfig, network: SocialGraph) -> Result<Self> {
        config.validate()?;
        if network.graph.num_nodes() == 0 {
            return Err(Error::InvalidConfig("empty contact network".into()));
        }
        if let InitialInfection::Node(v) = config.initial_infection {
            if v >= network.graph.num_nodes() {
                return Err(Error::InvalidConfig(format!("initial node {v} out of range")));
            }
        }
        let state = Self::blank_state(&network);
        Ok(Self {
            config,
            network,
            state,
        })
    }

    fn blank_state(network: &SocialGraph) -> HealthState {
        HealthState {
            health: vec![Health::Susceptible; network.graph.num_nodes()],
            vaccinations: vec![0; network.num_communities],
            newly_infected: vec![0; network.num_communities],
            t: 0,
        }
    }

    pub fn config(&self) -> &DiseaseConfig {
        &self.config
    }

    pub fn network(&self) -> &SocialGraph {
        &self.network
    }

    pub fn state(&self) -> &HealthState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut HealthState {
        &mut self.state
    }

    pub fn num_nodes(&self) -> usize {
        self.network.graph.num_nodes()
    }

    pub fn count(&self, status: Health) -> usize {
        self.state.health.iter().filter(|h| **h == status).count()
    }

    pub fn decode(&self, index: usize) -> Result<DiseaseAction> {
        match index.cmp(&self.num_nodes()) {
            std::cmp::Ordering::Less => Ok(DiseaseAction::Vaccinate(index)),
            std::cmp::Ordering::Equal => Ok(DiseaseAction::NoVaccinate),
            std::cmp::Ordering::Greater => Err(Error::InvalidAction(format!(
                "node {index} out of range for {} nodes",
                self.num_nodes()
            ))),
        }
    }

    pub fn encode(&self, action: DiseaseAction) -> usize {
        match action {
            DiseaseAction::Vaccinate(v) => v,
            DiseaseAction::NoVaccinate => self.num_nodes(),
        }
    }

    /// Infection then recovery, both against the infected set at entry.
    /// Returns the newly infected nodes.
    fn spread(&mut self, rng: &mut SimRng) -> Vec<usize> {
        let graph = &self.network.graph;
        let before = self.state.health.clone();
        let mut infected_now = Vec::new();
        for v in 0..graph.num_nodes() {
            if self.state.health[v] != Health::Susceptible {
                continue;
            }
            let k = graph
                .neighbors(v)
                .iter()
                .filter(|&&u| before[u] == Health::Infected)
                .count();
            if k > 0 && rng.random::<f64>() < infection_probability(self.config.tau, k) {
                self.state.health[v] = Health::Infected;
                infected_now.push(v);
            }
        }
        for (v, h) in before.iter().enumerate() {
            if *h == Health::Infected && rng.random::<f64>() < self.config.rho {
                self.state.health[v] = Health::Recovered;
            }
        }
        infected_now
    }

    pub fn step_action(&mut self, action: DiseaseAction, rng: &mut SimRng) -> Result<f64> {
        if let DiseaseAction::Vaccinate(v) = action {
            if v >= self.num_nodes() {
                return Err(Error::InvalidAction(format!("node {v} out of range")));
            }
            if self.state.health[v] == Health::Susceptible {
                self.state.health[v] = Health::Recovered;
            }
            self.state.vaccinations[self.network.communities[v]] += 1;
        }
        for v in self.spread(rng) {
            self.state.newly_infected[self.network.communities[v]] += 1;
        }
        self.state.t += 1;
        Ok(self.reward())
    }

    /// `ζ0 * (fraction of nodes not infected)`.
    pub fn reward(&self) -> f64 {
        let infected = self.count(Health::Infected);
        self.config.zeta0 * (self.num_nodes() - infected) as f64 / self.num_nodes() as f64
    }
}

impl Environment for DiseaseEnv {
    fn name(&self) -> &'static str {
        "disease"
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// All susceptible, seed one infection, then let it spread freely for the
    /// burn-in steps. Burn-in infections are not charged to any community.
    fn reset(&mut self, rng: &mut SimRng) {
        self.state = Self::blank_state(&self.network);
        let graph = &self.network.graph;
        let seed = match self.config.initial_infection {
            InitialInfection::Node(v) => v,
            InitialInfection::Random => rng.random_range(0..graph.num_nodes()),
            InitialInfection::MaxDegree => (0..graph.num_nodes())
                .max_by(|&a, &b| graph.degree(a).cmp(&graph.degree(b)).then(b.cmp(&a)))
                .unwrap(),
        };
        self.state.health[seed] = Health::Infected;
        for _ in 0..self.config.burn_in {
            self.spread(rng);
        }
    }

    fn observation_dim(&self) -> usize {
        3 * self.num_nodes()
    }

    /// One-hot (S, I, R) per node.
    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.observation_dim()];
        for (v, h) in self.state.health.iter().enumerate() {
            let slot = match h {
                Health::Susceptible => 0,
                Health::Infected => 1,
                Health::Recovered => 2,
            };
            obs[3 * v + slot] = 1.0;
        }
        obs
    }

    /// One category per node plus a final "vaccinate nobody".
    fn num_actions(&self) -> usize {
        self.num_nodes() + 1
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<f64> {
        let Action::Discrete(index) = *action else {
            return Err(Error::InvalidAction("disease control takes one node".into()));
        };
        let action = self.decode(index)?;
        self.step_action(action, rng)
    }

    fn fairness_delta(&self) -> f64 {
        let vacc: Vec<f64> = self.state.vaccinations.iter().map(|v| *v as f64).collect();
        let inf: Vec<f64> = self.state.newly_infected.iter().map(|v| *v as f64).collect();
        fairness_from_accumulators(&vacc, &inf)
    }

    fn extra_names(&self) -> Vec<String> {
        let c = self.network.num_communities;
        let mut names = vec!["fraction_infected".to_string()];
        names.extend((0..c).map(|i| format!("vaccinations_c{i}")));
        names.extend((0..c).map(|i| format!("newly_infected_c{i}")));
        names
    }

    fn extras(&self) -> Vec<f64> {
        let mut values = vec![self.count(Health::Infected) as f64 / self.num_nodes() as f64];
        values.extend(self.state.vaccinations.iter().map(|v| *v as f64));
        values.extend(self.state.newly_infected.iter().map(|v| *v as f64));
        values
    }
}
