//! Credit approval with two applicant groups.
//!
//! Applicants arrive one per step with a credit score `C in 1..=C_max` drawn
//! from their group's current score distribution. The bank accepts or
//! rejects; accepted applicants repay with probability `η(C)`. Repayment
//! moves a sliver of the group's probability mass at `C` one bucket up and
//! default moves it one bucket down, so lending decisions reshape both
//! populations over time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Action, Environment, SimRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LendingDecision {
    Reject,
    Accept,
}

impl LendingDecision {
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(LendingDecision::Reject),
            1 => Ok(LendingDecision::Accept),
            other => Err(Error::InvalidAction(format!("lending decision {other}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            LendingDecision::Reject => 0,
            LendingDecision::Accept => 1,
        }
    }
}

/// Repayment probability as a function of credit score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Repayment {
    /// `η(C)` listed for `C = 1..=C_max`.
    Table(Vec<f64>),
    /// `η(C) = low + (high - low) * (C - 1) / (C_max - 1)`.
    Affine { low: f64, high: f64 },
}

impl Default for Repayment {
    fn default() -> Self {
        Repayment::Affine {
            low: 0.1,
            high: 0.9,
        }
    }
}

impl Repayment {
    pub fn table(&self, c_max: usize) -> Vec<f64> {
        match self {
            Repayment::Table(t) => t.clone(),
            Repayment::Affine { low, high } => (1..=c_max)
                .map(|c| {
                    if c_max == 1 {
                        *high
                    } else {
                        low + (high - low) * (c - 1) as f64 / (c_max - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applicant {
    /// 1-based credit score.
    pub credit_score: usize,
    /// 0 for the advantaged group, 1 for the disadvantaged group.
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LendingConfig {
    pub c_max: usize,
    pub eta: Repayment,
    /// Initial score distributions of the two groups. Defaults to triangles
    /// peaked at `C_max - 2` and `C_max - 4`.
    pub group_distributions: Option<[Vec<f64>; 2]>,
    pub loan_amount: f64,
    pub interest_rate: f64,
    pub zeta0: f64,
    pub horizon: usize,
    /// Probability mass moved per repay/default event. Defaults to `1 / horizon`.
    pub shift: Option<f64>,
    pub initial_cash: f64,
}

impl Default for LendingConfig {
    fn default() -> Self {
        Self {
            c_max: 7,
            eta: Repayment::default(),
            group_distributions: None,
            loan_amount: 1.0,
            interest_rate: 0.3,
            zeta0: 1.0,
            horizon: 400,
            shift: None,
            initial_cash: 0.0,
        }
    }
}

fn triangle(c_max: usize, peak: usize) -> Vec<f64> {
    let weights: Vec<f64> = (1..=c_max)
        .map(|c| (4.0 - (c as f64 - peak as f64).abs()).max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

impl LendingConfig {
    pub fn repayment_table(&self) -> Vec<f64> {
        self.eta.table(self.c_max)
    }

    pub fn initial_distributions(&self) -> [Vec<f64>; 2] {
        match &self.group_distributions {
            Some(d) => d.clone(),
            None => [
                triangle(self.c_max, self.c_max.saturating_sub(2).max(1)),
                triangle(self.c_max, self.c_max.saturating_sub(4).max(1)),
            ],
        }
    }

    pub fn shift_amount(&self) -> f64 {
        self.shift.unwrap_or(1.0 / self.horizon as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.c_max < 2 {
            return bad("c_max must be at least 2".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        let eta = self.repayment_table();
        if eta.len() != self.c_max {
            return bad(format!("eta table has {} entries, c_max is {}", eta.len(), self.c_max));
        }
        if eta.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("eta values must lie in [0, 1]".into());
        }
        if eta.windows(2).any(|w| w[1] < w[0]) {
            return bad("eta must be non-decreasing in credit score".into());
        }
        for (g, dist) in self.initial_distributions().iter().enumerate() {
            if dist.len() != self.c_max {
                return bad(format!("group {g} distribution length {} != c_max", dist.len()));
            }
            if dist.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad(format!("group {g} distribution has negative mass"));
            }
            if (dist.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("group {g} distribution does not sum to 1"));
            }
        }
        let shift = self.shift_amount();
        if !(shift.is_finite() && shift >= 0.0) {
            return bad("shift must be nonnegative".into());
        }
        if !(self.loan_amount > 0.0 && self.interest_rate >= 0.0) {
            return bad("loan amount must be positive and interest nonnegative".into());
        }
        Ok(())
    }
}

/// Confusion counters of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl Confusion {
    /// `TP / (TP + FN)`, or 0 when the group has no would-repay applicants yet.
    pub fn tpr(&self) -> f64 {
        tpr(self.tp as f64, self.fn_ as f64)
    }
}

pub fn tpr(tp: f64, fn_: f64) -> f64 {
    if tp + fn_ > 0.0 {
        tp / (tp + fn_)
    } else {
        0.0
    }
}

/// `Δ = |TPR_1 - TPR_2|`.
pub fn fairness_from_counts(tp: [f64; 2], fn_: [f64; 2]) -> f64 {
    (tpr(tp[0], fn_[0]) - tpr(tp[1], fn_[1])).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LendingState {
    pub bank_cash: f64,
    pub distributions: [Vec<f64>; 2],
    pub confusion: [Confusion; 2],
    pub loans: [u64; 2],
    pub applicant: Applicant,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LendingOutcome {
    pub reward: f64,
    pub applicant: Applicant,
    pub decision: LendingDecision,
    /// Whether the applicant repaid (accepted) or would have repaid (rejected).
    pub repaid: bool,
}

#[derive(Debug, Clone)]
pub struct LendingEnv {
    config: LendingConfig,
    eta: Vec<f64>,
    state: LendingState,
}

fn sample_score(dist: &[f64], rng: &mut SimRng) -> usize {
    super::sample_categorical(dist, rng) + 1
}

impl LendingEnv {
    pub fn new(config: LendingConfig) -> Result<Self> {
        config.validate()?;
        let eta = config.repayment_table();
        let distributions = config.initial_distributions();
        let state = LendingState {
            bank_cash: config.initial_cash,
            distributions,
            confusion: [Confusion::default(); 2],
            loans: [0; 2],
            applicant: Applicant {
                credit_score: 1,
                group: 0,
            },
            t: 0,
        };
        Ok(Self { config, eta, state })
    }

    pub fn config(&self) -> &LendingConfig {
        &self.config
    }

    pub fn state(&self) -> &LendingState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut LendingState {
        &mut self.state
    }

    pub fn repayment(&self, score: usize) -> f64 {
        self.eta[score - 1]
    }

    pub fn repayment_table(&self) -> &[f64] {
        &self.eta
    }

    fn draw_applicant(&mut self, rng: &mut SimRng) {
        let group = usize::from(rng.random::<bool>());
        let credit_score = sample_score(&self.state.distributions[group], rng);
        self.state.applicant = Applicant {
            credit_score,
            group,
        };
    }

    fn shift_mass(&mut self, group: usize, score: usize, up: bool) {
        let dist = &mut self.state.distributions[group];
        let from = score - 1;
        let to = if up {
            if score == self.config.c_max {
                return;
            }
            from + 1
        } else {
            if score == 1 {
                return;
            }
            from - 1
        };
        let amount = self.config.shift_amount().min(dist[from]);
        dist[from] -= amount;
        dist[to] += amount;
    }

    pub fn step_decision(&mut self, decision: LendingDecision, rng: &mut SimRng) -> LendingOutcome {
        let applicant = self.state.applicant;
        let g = applicant.group;
        let repaid = rng.random::<f64>() < self.repayment(applicant.credit_score);
        let before = self.state.bank_cash;
        match decision {
            LendingDecision::Accept => {
                self.state.loans[g] += 1;
                if repaid {
                    self.state.bank_cash += self.config.loan_amount * self.config.interest_rate;
                    self.state.confusion[g].tp += 1;
                } else {
                    self.state.bank_cash -= self.config.loan_amount;
                    self.state.confusion[g].fp += 1;
                }
                self.shift_mass(g, applicant.credit_score, repaid);
            }
            LendingDecision::Reject => {
                if repaid {
                    self.state.confusion[g].fn_ += 1;
                } else {
                    self.state.confusion[g].tn += 1;
                }
            }
        }
        let reward = self.config.zeta0 * (self.state.bank_cash - before);
        self.state.t += 1;
        self.draw_applicant(rng);
        LendingOutcome {
            reward,
            applicant,
            decision,
            repaid,
        }
    }
}

impl Environment for LendingEnv {
    fn name(&self) -> &'static str {
        "lending"
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, rng: &mut SimRng) {
        self.state = LendingState {
            bank_cash: self.config.initial_cash,
            distributions: self.config.initial_distributions(),
            confusion: [Confusion::default(); 2],
            loans: [0; 2],
            applicant: self.state.applicant,
            t: 0,
        };
        self.draw_applicant(rng);
    }

    fn observation_dim(&self) -> usize {
        self.config.c_max + 2
    }

    /// One-hot credit score followed by one-hot group.
    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.observation_dim()];
        let a = self.state.applicant;
        obs[a.credit_score - 1] = 1.0;
        obs[self.config.c_max + a.group] = 1.0;
        obs
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<f64> {
        let Action::Discrete(index) = *action else {
            return Err(Error::InvalidAction("lending takes accept/reject".into()));
        };
        let decision = LendingDecision::from_index(index)?;
        Ok(self.step_decision(decision, rng).reward)
    }

    fn fairness_delta(&self) -> f64 {
        let [a, b] = self.state.confusion;
        (a.tpr() - b.tpr()).abs()
    }

    fn extra_names(&self) -> Vec<String> {
        ["bank_cash", "loans_g1", "loans_g2", "tp_g1", "fn_g1", "tp_g2", "fn_g2"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn extras(&self) -> Vec<f64> {
        let s = &self.state;
        let [a, b] = s.confusion;
        vec![
            s.bank_cash,
            s.loans[0] as f64,
            s.loans[1] as f64,
            a.tp as f64,
            a.fn_ as f64,
            b.tp as f64,
            b.fn_ as f64,
        ]
    }
}
