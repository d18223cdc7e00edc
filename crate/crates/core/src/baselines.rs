//! Hand-designed comparison policies.

use rand::Rng;

use crate::env::disease::{DiseaseAction, DiseaseEnv, Health};
use crate::env::lending::LendingDecision;
use crate::env::SimRng;

/// Exponentially smoothed per-site incident-rate estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimator {
    estimates: Vec<f64>,
    smoothing: f64,
}

impl RateEstimator {
    pub const DEFAULT_SMOOTHING: f64 = 0.3;

    /// Cold start: every site gets the same `initial` estimate.
    pub fn new(sites: usize, initial: f64, smoothing: f64) -> Self {
        Self {
            estimates: vec![initial.max(0.0); sites],
            smoothing,
        }
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// `λ̂_k <- (1 - s) λ̂_k + s * y_k` for every site. Unattended sites
    /// report zero discovered incidents, so their estimates decay.
    pub fn update(&mut self, observed: &[u64]) {
        let s = self.smoothing;
        for (est, y) in self.estimates.iter_mut().zip(observed) {
            *est = ((1.0 - s) * *est + s * *y as f64).max(0.0);
        }
    }
}

/// `P(Y >= m)` for `Y ~ Poisson(rate)`, summed over the upper tail so tiny
/// rates keep their relative order.
pub fn poisson_tail(rate: f64, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if rate <= 0.0 {
        return 0.0;
    }
    // log of the first tail term e^-λ λ^m / m!
    let mut log_term = -rate + m as f64 * rate.ln();
    for i in 1..=m {
        log_term -= (i as f64).ln();
    }
    let mut term = log_term.exp();
    let mut total = 0.0;
    let mut i = m;
    loop {
        total += term;
        i += 1;
        term *= rate / i as f64;
        if (i as f64 > rate && term < total * 1e-17) || i > m + 10_000 {
            break;
        }
    }
    total.min(1.0)
}

/// Hand out units one at a time, each to the site most likely to see at
/// least one more incident than it already has attention for. Ties go to the
/// lowest site index.
pub fn purely_greedy_allocate(estimates: &[f64], units: usize) -> Vec<usize> {
    let mut allocation = vec![0usize; estimates.len()];
    for _ in 0..units {
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (k, &rate) in estimates.iter().enumerate() {
            let p = poisson_tail(rate, allocation[k] + 1);
            if p > best_p {
                best = k;
                best_p = p;
            }
        }
        allocation[best] += 1;
    }
    allocation
}

/// Expected profit of one accepted loan at repayment probability `eta`.
pub fn expected_loan_profit(eta: f64, loan_amount: f64, interest_rate: f64) -> f64 {
    eta * loan_amount * interest_rate - (1.0 - eta) * loan_amount
}

/// Accept exactly when the expected profit is strictly positive.
pub fn greedy_lend(eta: f64, loan_amount: f64, interest_rate: f64) -> LendingDecision {
    if expected_loan_profit(eta, loan_amount, interest_rate) > 0.0 {
        LendingDecision::Accept
    } else {
        LendingDecision::Reject
    }
}

/// Per-group minimum accepted credit score. `C_max + 1` accepts nobody.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EoThresholds {
    pub thresholds: [usize; 2],
}

impl EoThresholds {
    pub fn decide(&self, group: usize, credit_score: usize) -> LendingDecision {
        if credit_score >= self.thresholds[group] {
            LendingDecision::Accept
        } else {
            LendingDecision::Reject
        }
    }
}

/// Expected TPR of a score threshold: the share of would-repay mass at or
/// above `threshold`.
pub fn expected_tpr(dist: &[f64], eta: &[f64], threshold: usize) -> f64 {
    let repay: Vec<f64> = dist.iter().zip(eta).map(|(m, e)| m * e).collect();
    let total: f64 = repay.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    repay.iter().skip(threshold - 1).sum::<f64>() / total
}

/// Expected profit per applicant when each group is equally likely.
pub fn expected_threshold_profit(
    dists: &[Vec<f64>; 2],
    eta: &[f64],
    thresholds: [usize; 2],
    loan_amount: f64,
    interest_rate: f64,
) -> f64 {
    (0..2)
        .map(|g| {
            0.5 * dists[g]
                .iter()
                .zip(eta)
                .skip(thresholds[g] - 1)
                .map(|(m, e)| m * expected_loan_profit(*e, loan_amount, interest_rate))
                .sum::<f64>()
        })
        .sum()
}

pub const EO_TOLERANCE: f64 = 0.02;

/// Most profitable threshold pair whose expected TPRs differ by at most
/// `tolerance`; when no pair qualifies, the pair with the smallest gap.
pub fn eo_thresholds(
    dists: &[Vec<f64>; 2],
    eta: &[f64],
    loan_amount: f64,
    interest_rate: f64,
    tolerance: f64,
) -> EoThresholds {
    let c_max = eta.len();
    let mut best_feasible: Option<([usize; 2], f64)> = None;
    let mut smallest_gap: Option<([usize; 2], f64)> = None;
    for t1 in 1..=c_max + 1 {
        for t2 in 1..=c_max + 1 {
            let pair = [t1, t2];
            let gap = (expected_tpr(&dists[0], eta, t1) - expected_tpr(&dists[1], eta, t2)).abs();
            if smallest_gap.is_none_or(|(_, g)| gap < g) {
                smallest_gap = Some((pair, gap));
            }
            if gap <= tolerance {
                let profit = expected_threshold_profit(dists, eta, pair, loan_amount, interest_rate);
                if best_feasible.is_none_or(|(_, p)| profit > p) {
                    best_feasible = Some((pair, profit));
                }
            }
        }
    }
    let (thresholds, _) = best_feasible.or(smallest_gap).expect("grid is non-empty");
    EoThresholds { thresholds }
}

/// Uniform over susceptible nodes, or over all nodes when none are left.
pub fn random_vaccinate(env: &DiseaseEnv, rng: &mut SimRng) -> DiseaseAction {
    let susceptible: Vec<usize> = susceptible_nodes(env);
    if susceptible.is_empty() {
        DiseaseAction::Vaccinate(rng.random_range(0..env.num_nodes()))
    } else {
        DiseaseAction::Vaccinate(susceptible[rng.random_range(0..susceptible.len())])
    }
}

/// Highest-degree susceptible node, or highest-degree node overall when none
/// are left. Ties go to the lowest index.
pub fn max_neighbor_vaccinate(env: &DiseaseEnv) -> DiseaseAction {
    let graph = &env.network().graph;
    let pick = |candidates: &mut dyn Iterator<Item = usize>| {
        candidates.max_by(|&a, &b| graph.degree(a).cmp(&graph.degree(b)).then(b.cmp(&a)))
    };
    let node = pick(&mut susceptible_nodes(env).into_iter())
        .or_else(|| pick(&mut (0..env.num_nodes())))
        .expect("network has nodes");
    DiseaseAction::Vaccinate(node)
}

fn susceptible_nodes(env: &DiseaseEnv) -> Vec<usize> {
    env.state()
        .health
        .iter()
        .enumerate()
        .filter(|(_, h)| **h == Health::Susceptible)
        .map(|(v, _)| v)
        .collect()
}
