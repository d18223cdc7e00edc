//! Fairness regularization of advantage estimates.
//!
//! The regularized advantage adds two non-positive terms to the weighted
//! policy advantage:
//!
//! ```text
//! Â_β = β0 Â + β1 min(0, ω - Δ_t) + β2 [Δ_t > ω] min(0, Δ_t - Δ_{t+1})
//! ```
//!
//! The first penalizes states whose violation exceeds the tolerance `ω`; the
//! second penalizes steps that fail to shrink an above-tolerance violation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Min-max normalize each term over the minibatch before weighting.
    #[serde(default)]
    pub normalize: bool,
}

pub const DEFAULT_OMEGA: f64 = 0.05;

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

impl RegularizerConfig {
    /// Plain advantage: `β = (1, 0, 0)`, no normalization.
    pub fn identity() -> Self {
        Self {
            beta0: 1.0,
            beta1: 0.0,
            beta2: 0.0,
            omega: DEFAULT_OMEGA,
            normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta0", self.beta0), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {b} must be finite and >= 0")));
            }
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidConfig(format!("omega = {} must be >= 0", self.omega)));
        }
        Ok(())
    }
}

/// The three unweighted terms `(Â, threshold term, decrease term)`.
pub fn regularization_terms(adv: f64, delta_t: f64, delta_next: f64, omega: f64) -> [f64; 3] {
    let threshold = (omega - delta_t).min(0.0);
    let decrease = if delta_t > omega {
        (delta_t - delta_next).min(0.0)
    } else {
        0.0
    };
    [adv, threshold, decrease]
}

/// Regularized advantage of a single sample, without normalization.
pub fn regularize_advantage(adv: f64, delta_t: f64, delta_next: f64, cfg: &RegularizerConfig) -> f64 {
    let [a, threshold, decrease] = regularization_terms(adv, delta_t, delta_next, cfg.omega);
    cfg.beta0 * a + cfg.beta1 * threshold + cfg.beta2 * decrease
}

/// Map values affinely onto [0, 1]; a constant batch maps to all zeros.
pub fn min_max_normalize(values: &mut [f64]) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if span > 0.0 && span.is_finite() {
        values.iter_mut().for_each(|v| *v = (*v - min) / span);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Shift and scale to zero mean and unit variance; constant batches become zeros.
pub fn standardize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mean) / (std + 1e-8));
}

/// Regularize a minibatch. With `cfg.normalize`, each of the three term
/// columns is min-max normalized over the batch before weighting.
pub fn regularize_batch(
    advantages: &[f64],
    deltas_t: &[f64],
    deltas_next: &[f64],
    cfg: &RegularizerConfig,
) -> Vec<f64> {
    debug_assert!(advantages.len() == deltas_t.len() && deltas_t.len() == deltas_next.len());
    if !cfg.normalize {
        return advantages
            .iter()
            .zip(deltas_t.iter().zip(deltas_next))
            .map(|(a, (d0, d1))| regularize_advantage(*a, *d0, *d1, cfg))
            .collect();
    }
    let n = advantages.len();
    let mut columns = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let terms = regularization_terms(advantages[i], deltas_t[i], deltas_next[i], cfg.omega);
        for (col, term) in columns.iter_mut().zip(terms) {
            col[i] = term;
        }
    }
    columns.iter_mut().for_each(|c| min_max_normalize(c));
    (0..n)
        .map(|i| cfg.beta0 * columns[0][i] + cfg.beta1 * columns[1][i] + cfg.beta2 * columns[2][i])
        .collect()
}
