//! Undirected graphs, shortest-path betweenness, and Girvan-Newman bisection.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};

/// Zachary's karate club network, 34 nodes and 78 edges, 0-indexed.
pub const KARATE_CLUB_EDGES: &str = include_str!("../data/karate.edgelist");

pub type Edge = (usize, usize);

fn ordered(u: usize, v: usize) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(num_nodes: usize, edges: &[Edge]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidConfig(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidConfig(format!("self-loop at node {u}")));
            }
            if adjacency[u].contains(&v) {
                return Err(Error::InvalidConfig(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        Ok(Self { adjacency })
    }

    /// Parse a whitespace-separated edge list, one `u v` pair per line.
    /// Blank lines and `#` comments are skipped. The node count is one past
    /// the largest index seen.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| {
                    Error::parse("edge list", format!("line {}: {s:?}: {e}", lineno + 1))
                })
            };
            if fields.len() != 2 {
                return Err(Error::parse(
                    "edge list",
                    format!("line {}: expected two node indices", lineno + 1),
                ));
            }
            edges.push((parse(fields[0])?, parse(fields[1])?));
        }
        let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::from_edges(n, &edges)
    }

    pub fn karate_club() -> Self {
        Self::parse_edge_list(KARATE_CLUB_EDGES).expect("embedded karate club edge list is valid")
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges = Vec::with_capacity(self.num_edges());
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            edges.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        edges
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        let Some(i) = self.adjacency[u].iter().position(|&x| x == v) else {
            return false;
        };
        self.adjacency[u].remove(i);
        let j = self.adjacency[v].iter().position(|&x| x == u).unwrap();
        self.adjacency[v].remove(j);
        true
    }

    /// Connected-component label per node. Components are numbered in order
    /// of their smallest node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.components().iter().max().map_or(0, |m| m + 1)
    }

    /// Single-source shortest-path counts and the BFS visiting order.
    fn shortest_path_dag(&self, source: usize) -> (Vec<usize>, Vec<f64>, Vec<Vec<usize>>) {
        let n = self.num_nodes();
        let mut order = Vec::with_capacity(n);
        let mut sigma = vec![0.0; n];
        let mut dist = vec![usize::MAX; n];
        let mut preds = vec![Vec::new(); n];
        sigma[source] = 1.0;
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &self.adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        (order, sigma, preds)
    }
}

/// Edge betweenness: for each edge, the sum over unordered node pairs of the
/// fraction of shortest paths between the pair that use the edge. Computed by
/// Brandes' dependency accumulation; pairs in different components
/// contribute nothing.
pub fn edge_betweenness(graph: &Graph) -> BTreeMap<Edge, f64> {
    let mut scores: BTreeMap<Edge, f64> = graph.edges().into_iter().map(|e| (e, 0.0)).collect();
    for s in 0..graph.num_nodes() {
        let (order, sigma, preds) = graph.shortest_path_dag(s);
        let mut dependency = vec![0.0; graph.num_nodes()];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                let c = sigma[v] / sigma[w] * (1.0 + dependency[w]);
                *scores.get_mut(&ordered(v, w)).unwrap() += c;
                dependency[v] += c;
            }
        }
    }
    // every unordered pair was counted from both endpoints
    scores.values_mut().for_each(|v| *v /= 2.0);
    scores
}

/// Node betweenness centrality (unnormalized, unordered pairs, endpoints excluded).
pub fn node_betweenness(graph: &Graph) -> Vec<f64> {
    let n = graph.num_nodes();
    let mut scores = vec![0.0; n];
    for s in 0..n {
        let (order, sigma, preds) = graph.shortest_path_dag(s);
        let mut dependency = vec![0.0; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                dependency[v] += sigma[v] / sigma[w] * (1.0 + dependency[w]);
            }
            if w != s {
                scores[w] += dependency[w];
            }
        }
    }
    scores.iter_mut().for_each(|v| *v /= 2.0);
    scores
}

/// Result of a Girvan-Newman split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bisection {
    /// Community label per node (0-based).
    pub labels: Vec<usize>,
    /// Edges removed, in removal order.
    pub removed: Vec<Edge>,
}

impl Bisection {
    pub fn num_communities(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_communities()];
        for (node, &c) in self.labels.iter().enumerate() {
            groups[c].push(node);
        }
        groups
    }
}

/// Remove highest-betweenness edges, recomputing after every removal, until
/// the number of connected components grows. Ties go to the
/// lexicographically smallest edge. A graph that already has several
/// components is returned as is.
pub fn girvan_newman_bisect(graph: &Graph) -> Bisection {
    let mut g = graph.clone();
    let start = g.num_components();
    let mut removed = Vec::new();
    if start >= 2 {
        return Bisection {
            labels: g.components(),
            removed,
        };
    }
    while g.num_edges() > 0 {
        let scores = edge_betweenness(&g);
        let best = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * best.abs().max(1.0);
        let (&(u, v), _) = scores
            .iter()
            .find(|(_, &s)| s >= best - tol)
            .expect("graph has edges");
        g.remove_edge(u, v);
        removed.push((u, v));
        if g.num_components() > start {
            break;
        }
    }
    Bisection {
        labels: g.components(),
        removed,
    }
}
