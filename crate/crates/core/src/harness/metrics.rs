//! Per-timestep evaluation series, aggregates and their CSV/JSON forms.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{attention, disease, lending};
use crate::error::{Error, Result};

/// One evaluation episode. Entry `t` of each series describes the state
/// after the `t`-th action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeries {
    pub reward: Vec<f64>,
    pub delta: Vec<f64>,
    /// `extras[j][t]` is the `j`-th named extra at step `t`.
    pub extras: Vec<Vec<f64>>,
}

impl TrialSeries {
    pub fn cumulative_reward(&self) -> f64 {
        self.reward.iter().sum()
    }

    pub fn mean_delta(&self) -> f64 {
        mean(&self.delta)
    }
}

/// Per-timestep mean and population standard deviation across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Aggregate {
    fn across<'a>(columns: impl Iterator<Item = &'a [f64]> + Clone, len: usize) -> Self {
        let n = columns.clone().count().max(1) as f64;
        let mut mean = vec![0.0; len];
        for c in columns.clone() {
            mean.iter_mut().zip(c).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; len];
        for c in columns {
            var.iter_mut()
                .zip(c.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Self { mean, std }
    }

    pub fn last(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub env: String,
    pub agent: String,
    pub seed_base: u64,
    pub horizon: usize,
    pub extra_names: Vec<String>,
    pub trials: Vec<TrialSeries>,
    pub reward: Aggregate,
    pub delta: Aggregate,
    pub extras: Vec<Aggregate>,
    /// Mean Δ over the trajectory, one entry per trial.
    pub delta_summary: Vec<f64>,
}

impl MetricsSeries {
    pub fn from_trials(
        env: &str,
        agent: &str,
        seed_base: u64,
        extra_names: Vec<String>,
        trials: Vec<TrialSeries>,
    ) -> Result<Self> {
        let horizon = trials.first().map_or(0, |t| t.reward.len());
        for t in &trials {
            let ok = t.reward.len() == horizon
                && t.delta.len() == horizon
                && t.extras.len() == extra_names.len()
                && t.extras.iter().all(|e| e.len() == horizon);
            if !ok {
                return Err(Error::Shape {
                    context: "trial series length",
                    expected: horizon,
                    found: t.reward.len(),
                });
            }
        }
        let reward = Aggregate::across(trials.iter().map(|t| t.reward.as_slice()), horizon);
        let delta = Aggregate::across(trials.iter().map(|t| t.delta.as_slice()), horizon);
        let extras = (0..extra_names.len())
            .map(|j| Aggregate::across(trials.iter().map(|t| t.extras[j].as_slice()), horizon))
            .collect();
        let delta_summary = trials.iter().map(TrialSeries::mean_delta).collect();
        Ok(Self {
            env: env.to_string(),
            agent: agent.to_string(),
            seed_base,
            horizon,
            extra_names,
            trials,
            reward,
            delta,
            extras,
            delta_summary,
        })
    }

    pub fn num_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn extra(&self, name: &str) -> Option<&Aggregate> {
        self.extra_names
            .iter()
            .position(|n| n == name)
            .map(|j| &self.extras[j])
    }

    /// Mean over trials of the summed reward.
    pub fn mean_cumulative_reward(&self) -> f64 {
        mean(&self.trials.iter().map(TrialSeries::cumulative_reward).collect::<Vec<_>>())
    }

    /// Mean over trials of the per-trajectory mean Δ.
    pub fn mean_delta(&self) -> f64 {
        mean(&self.delta_summary)
    }

    /// Mean Δ over the steps `[from, to)`, averaged over trials.
    pub fn mean_delta_between(&self, from: usize, to: usize) -> f64 {
        mean(&self.delta.mean[from..to])
    }

    pub fn final_delta(&self) -> f64 {
        self.delta.last()
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("t,trial,reward,delta");
        for n in &self.extra_names {
            h.push(',');
            h.push_str(n);
        }
        h
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        for (i, trial) in self.trials.iter().enumerate() {
            for t in 0..self.horizon {
                write!(out, "{t},{i},{},{}", trial.reward[t], trial.delta[t])?;
                for e in &trial.extras {
                    write!(out, ",{}", e[t])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_file(path, |w| self.write_csv(w))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_file(path, |w| {
            serde_json::to_writer_pretty(&mut *w, self).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::parse("metrics json", e))
    }

    /// Rebuild a series from its CSV form. The CSV carries no metadata, so
    /// the environment, agent and seed base are supplied by the caller.
    pub fn load_csv(path: &Path, env: &str, agent: &str, seed_base: u64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| Error::parse("metrics csv", "empty file"))?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.len() < 4 || columns[..4] != ["t", "trial", "reward", "delta"] {
            return Err(Error::parse("metrics csv", format!("unexpected header `{header}`")));
        }
        let extra_names: Vec<String> = columns[4..].iter().map(|s| s.to_string()).collect();
        let mut trials: Vec<TrialSeries> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(Error::parse(
                    "metrics csv",
                    format!("line {} has {} fields, expected {}", lineno + 2, fields.len(), columns.len()),
                ));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::parse("metrics csv", format!("line {}: {e}", lineno + 2)))
            };
            let float = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse("metrics csv", format!("line {}: {e}", lineno + 2)))
            };
            let (t, trial) = (int(fields[0])?, int(fields[1])?);
            if trial == trials.len() {
                trials.push(TrialSeries {
                    reward: Vec::new(),
                    delta: Vec::new(),
                    extras: vec![Vec::new(); extra_names.len()],
                });
            }
            let series = trials
                .get_mut(trial)
                .filter(|s| s.reward.len() == t)
                .ok_or_else(|| Error::parse("metrics csv", format!("line {}: rows out of order", lineno + 2)))?;
            series.reward.push(float(fields[2])?);
            series.delta.push(float(fields[3])?);
            for (j, f) in fields[4..].iter().enumerate() {
                series.extras[j].push(float(f)?);
            }
        }
        Self::from_trials(env, agent, seed_base, extra_names, trials)
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<std::fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn columns_with_prefix(names: &[String], row: &[f64], prefix: &str) -> Vec<f64> {
    let mut indexed: Vec<(usize, f64)> = names
        .iter()
        .zip(row)
        .filter_map(|(n, v)| n.strip_prefix(prefix)?.parse::<usize>().ok().map(|i| (i, *v)))
        .collect();
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, v)| v).collect()
}

/// Recompute Δ from one row of logged extras. `None` when the environment
/// has no accumulator columns to recompute from.
pub fn recompute_delta(env: &str, names: &[String], row: &[f64]) -> Option<f64> {
    let col = |name: &str| names.iter().position(|n| n == name).map(|j| row[j]);
    match env {
        "attention" => Some(attention::fairness_from_accumulators(
            &columns_with_prefix(names, row, "discovered_"),
            &columns_with_prefix(names, row, "occurred_"),
        )),
        "lending" => Some(lending::fairness_from_counts(
            [col("tp_g1")?, col("tp_g2")?],
            [col("fn_g1")?, col("fn_g2")?],
        )),
        "disease" => Some(disease::fairness_from_accumulators(
            &columns_with_prefix(names, row, "vaccinations_c"),
            &columns_with_prefix(names, row, "newly_infected_c"),
        )),
        "bandit" => Some(0.0),
        _ => None,
    }
}
