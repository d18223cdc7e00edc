//! Attention allocation for incident monitoring.
//!
//! Each step the agent splits `N` units of attention over `K` sites. Site `k`
//! produces `y_k ~ Poisson(R_k)` incidents of which `min(a_k, y_k)` are
//! discovered. Unattended sites drift up by `d`; attended sites drop by
//! `d * a_k`, clamped at zero.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{max_pairwise_gap, sample_categorical, Action, Environment, SimRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub sites: usize,
    pub units: usize,
    pub drift: f64,
    pub zeta0: f64,
    pub zeta1: f64,
    /// Defaults to rates evenly spaced over [1.5, 3.5].
    pub initial_rates: Option<Vec<f64>>,
    pub horizon: usize,
    /// Expose occurred rather than discovered incident counts to the agent.
    pub observe_occurred: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            sites: 5,
            units: 6,
            drift: 0.1,
            zeta0: 1.0,
            zeta1: 0.25,
            initial_rates: None,
            horizon: 200,
            observe_occurred: false,
        }
    }
}

impl AttentionConfig {
    /// The `K = 10` variant, where attention cannot cover every site.
    pub fn harder() -> Self {
        Self {
            sites: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.sites < 2 {
            return bad(format!("attention needs at least 2 sites, got {}", self.sites));
        }
        if self.units < 1 {
            return bad("attention needs at least one unit".into());
        }
        if !(self.drift > 0.0 && self.drift.is_finite()) {
            return bad(format!("drift must be positive, got {}", self.drift));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if let Some(rates) = &self.initial_rates {
            if rates.len() != self.sites {
                return bad(format!(
                    "initial_rates has {} entries for {} sites",
                    rates.len(),
                    self.sites
                ));
            }
            if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return bad("initial rates must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn starting_rates(&self) -> Vec<f64> {
        match &self.initial_rates {
            Some(r) => r.clone(),
            None => {
                let k = self.sites;
                (0..k)
                    .map(|i| 1.5 + 2.0 * i as f64 / (k - 1) as f64)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub rates: Vec<f64>,
    pub cum_discovered: Vec<u64>,
    pub cum_occurred: Vec<u64>,
    pub last_allocation: Vec<usize>,
    pub last_incidents: Vec<u64>,
    pub last_discovered: Vec<u64>,
    pub t: usize,
}

/// Outcome of one attention step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStep {
    pub reward: f64,
    pub occurred: Vec<u64>,
    pub discovered: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct AttentionEnv {
    config: AttentionConfig,
    state: AttentionState,
}

/// `Δ = max_{k,k'} |disc_k/(occ_k+1) - disc_k'/(occ_k'+1)|`.
pub fn fairness_from_accumulators(discovered: &[f64], occurred: &[f64]) -> f64 {
    let ratios: Vec<f64> = discovered
        .iter()
        .zip(occurred)
        .map(|(d, o)| d / (o + 1.0))
        .collect();
    max_pairwise_gap(&ratios)
}

/// Sample `units` independent draws from `probs` and count them per site.
pub fn decode_action(probs: &[f64], units: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut allocation = vec![0; probs.len()];
    for _ in 0..units {
        allocation[sample_categorical(probs, rng)] += 1;
    }
    allocation
}

/// Deterministic allocation by largest remainder of `units * probs`.
pub fn mode_allocation(probs: &[f64], units: usize) -> Vec<usize> {
    let quotas: Vec<f64> = probs.iter().map(|p| p * units as f64).collect();
    let mut allocation: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = allocation.iter().sum();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(units.saturating_sub(assigned)) {
        allocation[k] += 1;
    }
    allocation
}

impl AttentionEnv {
    pub fn new(config: AttentionConfig) -> Result<Self> {
        config.validate()?;
        let state = Self::initial_state(&config);
        Ok(Self { config, state })
    }

    fn initial_state(config: &AttentionConfig) -> AttentionState {
        let k = config.sites;
        AttentionState {
            rates: config.starting_rates(),
            cum_discovered: vec![0; k],
            cum_occurred: vec![0; k],
            last_allocation: vec![0; k],
            last_incidents: vec![0; k],
            last_discovered: vec![0; k],
            t: 0,
        }
    }

    pub fn config(&self) -> &AttentionConfig {
        &self.config
    }

    pub fn state(&self) -> &AttentionState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut AttentionState {
        &mut self.state
    }

    pub fn mean_rate(&self) -> f64 {
        self.state.rates.iter().sum::<f64>() / self.state.rates.len() as f64
    }

    pub fn step_allocation(&mut self, allocation: &[usize], rng: &mut SimRng) -> Result<AttentionStep> {
        let cfg = &self.config;
        if allocation.len() != cfg.sites {
            return Err(Error::InvalidAction(format!(
                "allocation has {} entries for {} sites",
                allocation.len(),
                cfg.sites
            )));
        }
        let total: usize = allocation.iter().sum();
        if total != cfg.units {
            return Err(Error::InvalidAction(format!(
                "allocation assigns {total} units, expected {}",
                cfg.units
            )));
        }
        let s = &mut self.state;
        let mut occurred = Vec::with_capacity(cfg.sites);
        let mut discovered = Vec::with_capacity(cfg.sites);
        for k in 0..cfg.sites {
            let rate = s.rates[k];
            let y = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| Error::InvalidConfig(format!("poisson rate {rate}: {e}")))?
                    .sample(rng) as u64
            } else {
                0
            };
            let a = allocation[k];
            let found = y.min(a as u64);
            occurred.push(y);
            discovered.push(found);
            s.rates[k] = if a == 0 {
                rate + cfg.drift
            } else {
                (rate - cfg.drift * a as f64).max(0.0)
            };
            s.cum_occurred[k] += y;
            s.cum_discovered[k] += found;
        }
        let found: u64 = discovered.iter().sum();
        let missed: u64 = occurred.iter().sum::<u64>() - found;
        let reward = cfg.zeta0 * found as f64 - cfg.zeta1 * missed as f64;
        s.last_allocation = allocation.to_vec();
        s.last_incidents = occurred.clone();
        s.last_discovered = discovered.clone();
        s.t += 1;
        Ok(AttentionStep {
            reward,
            occurred,
            discovered,
        })
    }
}

impl Environment for AttentionEnv {
    fn name(&self) -> &'static str {
        "attention"
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, _rng: &mut SimRng) {
        self.state = Self::initial_state(&self.config);
    }

    fn observation_dim(&self) -> usize {
        3 * self.config.sites
    }

    /// Last allocation and last incident counts (both divided by `N`),
    /// followed by each site's discovered/occurred ratio.
    fn observe(&self) -> Vec<f64> {
        let s = &self.state;
        let n = self.config.units as f64;
        let incidents = if self.config.observe_occurred {
            &s.last_incidents
        } else {
            &s.last_discovered
        };
        s.last_allocation
            .iter()
            .map(|a| *a as f64 / n)
            .chain(incidents.iter().map(|y| *y as f64 / n))
            .chain(
                s.cum_discovered
                    .iter()
                    .zip(&s.cum_occurred)
                    .map(|(d, o)| *d as f64 / (*o as f64 + 1.0)),
            )
            .collect()
    }

    fn num_actions(&self) -> usize {
        self.config.sites
    }

    fn sample_action(&self, probs: &[f64], rng: &mut SimRng) -> Action {
        Action::Allocation(decode_action(probs, self.config.units, rng))
    }

    fn mode_action(&self, probs: &[f64]) -> Action {
        Action::Allocation(mode_allocation(probs, self.config.units))
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<f64> {
        match action {
            Action::Allocation(a) => self.step_allocation(a, rng).map(|s| s.reward),
            Action::Discrete(_) => Err(Error::InvalidAction(
                "attention expects an allocation vector".into(),
            )),
        }
    }

    fn fairness_delta(&self) -> f64 {
        let s = &self.state;
        let disc: Vec<f64> = s.cum_discovered.iter().map(|v| *v as f64).collect();
        let occ: Vec<f64> = s.cum_occurred.iter().map(|v| *v as f64).collect();
        fairness_from_accumulators(&disc, &occ)
    }

    fn extra_names(&self) -> Vec<String> {
        let k = self.config.sites;
        let mut names = vec!["mean_rate".to_string()];
        names.extend((0..k).map(|i| format!("rate_{i}")));
        names.extend((0..k).map(|i| format!("discovered_{i}")));
        names.extend((0..k).map(|i| format!("occurred_{i}")));
        names
    }

    fn extras(&self) -> Vec<f64> {
        let s = &self.state;
        let mut values = vec![self.mean_rate()];
        values.extend(s.rates.iter().copied());
        values.extend(s.cum_discovered.iter().map(|v| *v as f64));
        values.extend(s.cum_occurred.iter().map(|v| *v as f64));
        values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env(config: AttentionConfig) -> AttentionEnv {
        AttentionEnv::new(config).unwrap()
    }

    #[test]
    fn default_rates_are_spread() {
        let rates = AttentionConfig::default().starting_rates();
        assert_eq!(rates, vec![1.5, 2.0, 2.5, 3.0, 3.5]);
    }

    #[test]
    fn discovery_is_capped_by_attention() {
        // rate high enough that y >= 2 is near certain on site 0
        let cfg = AttentionConfig {
            sites: 2,
            units: 2,
            initial_rates: Some(vec![60.0, 0.0]),
            ..AttentionConfig::default()
        };
        let mut e = env(cfg);
        let mut rng = SimRng::seed_from_u64(1);
        let step = e.step_allocation(&[2, 0], &mut rng).unwrap();
        assert!(step.occurred[0] >= 2);
        assert_eq!(step.discovered[0], 2);
        assert_eq!(step.occurred[1], 0);
    }

    #[test]
    fn rate_update_rule() {
        let cfg = AttentionConfig {
            sites: 2,
            units: 3,
            initial_rates: Some(vec![1.0, 1.0]),
            ..AttentionConfig::default()
        };
        let mut e = env(cfg);
        let mut rng = SimRng::seed_from_u64(2);
        e.step_allocation(&[0, 3], &mut rng).unwrap();
        assert!((e.state().rates[0] - 1.1).abs() < 1e-12);
        assert!((e.state().rates[1] - 0.7).abs() < 1e-12);
        e.step_allocation(&[0, 3], &mut rng).unwrap();
        e.step_allocation(&[0, 3], &mut rng).unwrap();
        e.step_allocation(&[0, 3], &mut rng).unwrap();
        assert_eq!(e.state().rates[1], 0.0);
    }

    #[test]
    fn reward_weights() {
        let cfg = AttentionConfig {
            sites: 2,
            units: 3,
            initial_rates: Some(vec![0.0, 0.0]),
            ..AttentionConfig::default()
        };
        // y = (4, 0), yhat = (3, 0) -> 3 - 0.25 * 1
        let found = 3.0;
        let missed = 1.0;
        assert_eq!(cfg.zeta0 * found - cfg.zeta1 * missed, 2.75);
        let mut e = env(cfg);
        let mut rng = SimRng::seed_from_u64(3);
        let step = e.step_allocation(&[3, 0], &mut rng).unwrap();
        assert_eq!(step.reward, 0.0);
    }

    #[test]
    fn invalid_allocations_rejected() {
        let mut e = env(AttentionConfig::default());
        let mut rng = SimRng::seed_from_u64(4);
        assert!(e.step_allocation(&[1, 1, 1, 1, 1], &mut rng).is_err());
        assert!(e.step_allocation(&[6, 0, 0, 0], &mut rng).is_err());
        assert!(e.step(&Action::Discrete(0), &mut rng).is_err());
    }

    #[test]
    fn fairness_examples() {
        let e = env(AttentionConfig::default());
        assert_eq!(e.fairness_delta(), 0.0);
        let d = fairness_from_accumulators(&[3.0, 2.0], &[4.0, 5.0]);
        assert!((d - (3.0 / 5.0 - 2.0 / 6.0)).abs() < 1e-12);
        assert!((d - 0.26666666666666666).abs() < 1e-9);
    }

    #[test]
    fn fairness_matches_pair_enumeration() {
        let disc: [f64; 3] = [4.0, 1.0, 7.0];
        let occ = [9.0, 2.0, 7.0];
        let mut brute: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let gap = (disc[i] / (occ[i] + 1.0) - disc[j] / (occ[j] + 1.0)).abs();
                brute = brute.max(gap);
            }
        }
        assert!((fairness_from_accumulators(&disc, &occ) - brute).abs() < 1e-15);
    }

    #[test]
    fn observation_layout() {
        let e = env(AttentionConfig::default());
        let obs = e.observe();
        assert_eq!(obs.len(), 15);
        assert!(obs.iter().all(|v| *v == 0.0));
        assert_eq!(e.observe(), obs);
    }

    #[test]
    fn decode_degenerate_and_total() {
        let mut rng = SimRng::seed_from_u64(5);
        let a = decode_action(&[0.0, 1.0, 0.0, 0.0, 0.0], 6, &mut rng);
        assert_eq!(a, vec![0, 6, 0, 0, 0]);
        for _ in 0..100 {
            let a = decode_action(&[0.1, 0.2, 0.3, 0.2, 0.2], 6, &mut rng);
            assert_eq!(a.iter().sum::<usize>(), 6);
        }
    }

    #[test]
    fn mode_allocation_sums_to_units() {
        assert_eq!(mode_allocation(&[0.2; 5], 6), vec![2, 1, 1, 1, 1]);
        assert_eq!(mode_allocation(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(mode_allocation(&[1.0, 0.0], 6), vec![6, 0]);
    }

    #[test]
    fn uniform_cover_drives_rates_to_zero() {
        // N = K * ceil(R_max / d) with one unit per site per ceil: rates hit 0
        let cfg = AttentionConfig {
            sites: 3,
            units: 3,
            initial_rates: Some(vec![0.3, 0.5, 0.2]),
            ..AttentionConfig::default()
        };
        let mut e = env(cfg);
        let mut rng = SimRng::seed_from_u64(6);
        // one extra step absorbs floating-point residue from repeated subtraction
        for _ in 0..6 {
            e.step_allocation(&[1, 1, 1], &mut rng).unwrap();
        }
        assert!(e.state().rates.iter().all(|r| *r == 0.0));
    }
}
