//! Dense feed-forward networks with hand-written backpropagation.
//!
//! An [`MlpNetwork`] is a stack of affine layers with `tanh` between them and
//! one of two heads on top: a softmax over discrete actions (the policy) or a
//! single linear output (the value function). Weights are row-major with shape
//! `(out, in)`.
//!
//! Gradients are exact and analytic; there is no autodiff. A [`ForwardCache`]
//! records the activations of one forward pass and is stamped with the
//! parameter state that produced it, so a cache from before an update cannot
//! be fed to `backward` afterwards.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    SoftmaxPolicy,
    ScalarValue,
}

impl Head {
    fn tag(self) -> &'static str {
        match self {
            Head::SoftmaxPolicy => "softmax",
            Head::ScalarValue => "scalar",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    head: Head,
    stamp: u64,
}

/// Activation trace of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
    output: Vec<f64>,
    stamp: u64,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Per-layer gradients, congruent with the owning network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Numerically stable softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `log softmax(logits)[k]` for every `k`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - log_total).collect()
}

impl MlpNetwork {
    /// Zero-initialized network.
    pub fn zeros(layer_sizes: &[usize], head: Head) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig(format!(
                "layer sizes must list at least input and output, all positive (got {layer_sizes:?})"
            )));
        }
        let out = *layer_sizes.last().unwrap();
        if head == Head::ScalarValue && out != 1 {
            return Err(Error::Shape {
                context: "scalar value head",
                expected: 1,
                found: out,
            });
        }
        let weights = layer_sizes
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_sizes.windows(2).map(|w| vec![0.0; w[1]]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            head,
            stamp: fresh_stamp(),
        })
    }

    /// Scaled-uniform initialization. Each weight is drawn from
    /// `U(-g * sqrt(3 / fan_in), g * sqrt(3 / fan_in))`, giving variance
    /// `g^2 / fan_in`. Hidden layers use `g = 1`; the output layer uses
    /// `g = 0.01` for policies (near-uniform start) and `g = 1` for values.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, head)?;
        let last = net.num_layers() - 1;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let fan_in = layer_sizes[l] as f64;
            let gain = match (l == last, head) {
                (true, Head::SoftmaxPolicy) => 0.01,
                _ => 1.0,
            };
            let limit = gain * (3.0 / fan_in).sqrt();
            for x in w.iter_mut() {
                *x = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    /// Mutable parameter access. Invalidates outstanding caches.
    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        self.stamp = fresh_stamp();
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        self.stamp = fresh_stamp();
        &mut self.biases[layer]
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut current = input.to_vec();
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo += row.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>();
            }
            debug_assert_eq!(z.len(), n_out);
            inputs.push(current);
            current = if l < last {
                z.iter().map(|v| v.tanh()).collect()
            } else {
                z
            };
        }
        let logits = current;
        let output = match self.head {
            Head::SoftmaxPolicy => softmax(&logits),
            Head::ScalarValue => logits.clone(),
        };
        let cache = ForwardCache {
            inputs,
            logits,
            output: output.clone(),
            stamp: self.stamp,
        };
        Ok((output, cache))
    }

    /// Forward pass without keeping the trace.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Gradient of a scalar loss given `dL/d(output)`. For the softmax head
    /// the output is the probability vector, so the softmax Jacobian is
    /// applied before backpropagating.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<GradientSet> {
        if grad_output.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "output gradient",
                expected: self.output_dim(),
                found: grad_output.len(),
            });
        }
        let grad_logits = match self.head {
            Head::ScalarValue => grad_output.to_vec(),
            Head::SoftmaxPolicy => {
                let p = &cache.output;
                let inner: f64 = p.iter().zip(grad_output).map(|(p, g)| p * g).sum();
                p.iter()
                    .zip(grad_output)
                    .map(|(p, g)| p * (g - inner))
                    .collect()
            }
        };
        self.backward_logits(cache, &grad_logits)
    }

    /// Gradient of a scalar loss given `dL/d(logits)` (pre-softmax).
    pub fn backward_logits(&self, cache: &ForwardCache, grad_logits: &[f64]) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros_like(self);
        self.accumulate_logit_gradient(cache, grad_logits, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward_logits`](Self::backward_logits) but adds into `grads`.
    pub fn accumulate_logit_gradient(
        &self,
        cache: &ForwardCache,
        grad_logits: &[f64],
        grads: &mut GradientSet,
    ) -> Result<()> {
        if cache.stamp != self.stamp || cache.inputs.len() != self.num_layers() {
            return Err(Error::StaleCache);
        }
        if grad_logits.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "logit gradient",
                expected: self.output_dim(),
                found: grad_logits.len(),
            });
        }
        grads.check_congruent(self)?;
        let mut delta = grad_logits.to_vec();
        for l in (0..self.num_layers()).rev() {
            let n_in = self.layer_sizes[l];
            let a = &cache.inputs[l];
            let gw = &mut grads.weights[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(a) {
                    *g += d * x;
                }
            }
            grads.biases[l].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
            if l > 0 {
                let w = &self.weights[l];
                let mut upstream = vec![0.0; n_in];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (u, wv) in upstream.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *u += d * wv;
                    }
                }
                // a = tanh(z) so da/dz = 1 - a^2
                delta = upstream
                    .iter()
                    .zip(a)
                    .map(|(u, act)| u * (1.0 - act * act))
                    .collect();
            }
        }
        Ok(())
    }

    /// `theta <- theta + step_size * grads`. Callers descend by negating.
    pub fn apply_update(&mut self, grads: &GradientSet, step_size: f64) -> Result<()> {
        grads.check_congruent(self)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient update"));
        }
        if !step_size.is_finite() {
            return Err(Error::NonFinite("step size"));
        }
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.iter_mut().zip(g).for_each(|(w, g)| *w += step_size * g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.iter_mut().zip(g).for_each(|(b, g)| *b += step_size * g);
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Plain-text checkpoint: a header, then each layer's row-major weights
    /// followed by its biases. Floats are written in shortest round-trip form.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pocar-mlp 1")?;
        writeln!(out, "head {}", self.head.tag())?;
        writeln!(out, "activation tanh")?;
        let sizes: Vec<String> = self.layer_sizes.iter().map(ToString::to_string).collect();
        writeln!(out, "layers {}", sizes.join(" "))?;
        for l in 0..self.num_layers() {
            let n_in = self.layer_sizes[l];
            writeln!(out, "weights {l}")?;
            for row in self.weights[l].chunks(n_in) {
                write_floats(&mut out, row)?;
            }
            writeln!(out, "biases {l}")?;
            write_floats(&mut out, &self.biases[l])?;
        }
        writeln!(out, "end")
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self> {
        let what = "network checkpoint";
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            match lines.next() {
                Some(Ok(line)) => Ok(line),
                Some(Err(e)) => Err(Error::parse(what, e.to_string())),
                None => Err(Error::parse(what, "unexpected end of file")),
            }
        };
        let magic = next()?;
        if magic.trim() != "pocar-mlp 1" {
            return Err(Error::parse(what, format!("unsupported header {magic:?}")));
        }
        let head = match next()?.trim() {
            "head softmax" => Head::SoftmaxPolicy,
            "head scalar" => Head::ScalarValue,
            other => return Err(Error::parse(what, format!("unknown head line {other:?}"))),
        };
        if next()?.trim() != "activation tanh" {
            return Err(Error::parse(what, "only tanh hidden activations are supported"));
        }
        let layers_line = next()?;
        let sizes = layers_line
            .strip_prefix("layers ")
            .ok_or_else(|| Error::parse(what, "missing layers line"))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::parse(what, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::zeros(&sizes, head)?;
        for l in 0..net.num_layers() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            if next()?.trim() != format!("weights {l}") {
                return Err(Error::parse(what, format!("expected weights block {l}")));
            }
            for o in 0..n_out {
                let row = parse_floats(&next()?, n_in, what)?;
                net.weights[l][o * n_in..(o + 1) * n_in].copy_from_slice(&row);
            }
            if next()?.trim() != format!("biases {l}") {
                return Err(Error::parse(what, format!("expected biases block {l}")));
            }
            net.biases[l] = parse_floats(&next()?, n_out, what)?;
        }
        if next()?.trim() != "end" {
            return Err(Error::parse(what, "missing end marker"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(file))
    }

    /// Bitwise parameter equality.
    pub fn same_parameters(&self, other: &Self) -> bool {
        let bits = |v: &Vec<Vec<f64>>| -> Vec<u64> {
            v.iter().flatten().map(|x| x.to_bits()).collect()
        };
        self.layer_sizes == other.layer_sizes
            && self.head == other.head
            && bits(&self.weights) == bits(&other.weights)
            && bits(&self.biases) == bits(&other.biases)
    }
}

fn write_floats<W: Write>(out: &mut W, values: &[f64]) -> std::io::Result<()> {
    let text: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
    writeln!(out, "{}", text.join(" "))
}

fn parse_floats(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::parse(what, format!("{t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            what,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

impl GradientSet {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn check_congruent(&self, net: &MlpNetwork) -> Result<()> {
        if self.weights.len() != net.num_layers() || self.biases.len() != net.num_layers() {
            return Err(Error::Shape {
                context: "gradient layer count",
                expected: net.num_layers(),
                found: self.weights.len(),
            });
        }
        for l in 0..net.num_layers() {
            if self.weights[l].len() != net.weights[l].len() {
                return Err(Error::Shape {
                    context: "gradient weight block",
                    expected: net.weights[l].len(),
                    found: self.weights[l].len(),
                });
            }
            if self.biases[l].len() != net.biases[l].len() {
                return Err(Error::Shape {
                    context: "gradient bias block",
                    expected: net.biases[l].len(),
                    found: self.biases[l].len(),
                });
            }
        }
        Ok(())
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|v| *v == 0.0)
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescale so the global L2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Gradient-ascent optimizer state for one network.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam(Adam),
}

#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    steps: i32,
    first: GradientSet,
    second: GradientSet,
}

impl Adam {
    pub fn new(net: &MlpNetwork) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: 0,
            first: GradientSet::zeros_like(net),
            second: GradientSet::zeros_like(net),
        }
    }

    fn direction(&mut self, grads: &GradientSet) -> GradientSet {
        self.steps += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.steps);
        let c2 = 1.0 - b2.powi(self.steps);
        let mut dir = grads.clone();
        for ((d, m), v) in dir
            .values_mut()
            .zip(self.first.values_mut())
            .zip(self.second.values_mut())
        {
            let g = *d;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *d = (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
        dir
    }
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &MlpNetwork) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(net)),
        }
    }

    /// Move `net` uphill along `grads`.
    pub fn ascend(&mut self, net: &mut MlpNetwork, grads: &GradientSet, step_size: f64) -> Result<()> {
        grads.check_congruent(net)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient update"));
        }
        match self {
            Optimizer::Sgd => net.apply_update(grads, step_size),
            Optimizer::Adam(adam) => {
                let dir = adam.direction(grads);
                net.apply_update(&dir, step_size)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_policy_is_uniform() {
        let net = MlpNetwork::zeros(&[3, 4], Head::SoftmaxPolicy).unwrap();
        let out = net.predict(&[0.3, -2.0, 7.0]).unwrap();
        for p in out {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_scalar_layer() {
        let mut net = MlpNetwork::zeros(&[1, 1], Head::ScalarValue).unwrap();
        net.weights_mut(0)[0] = 1.0;
        assert_eq!(net.predict(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        let mut net = MlpNetwork::zeros(&[1, 1], Head::ScalarValue).unwrap();
        net.weights_mut(0)[0] = 0.7;
        let (_, cache) = net.forward(&[2.0]).unwrap();
        let g = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.weights[0][0], 2.0);
        assert_eq!(g.biases[0][0], 1.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = MlpNetwork::new(&[4, 8, 3], Head::SoftmaxPolicy, &mut rng).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(net.backward(&cache, &[0.0; 3]).unwrap().is_zero());
    }

    #[test]
    fn shape_errors() {
        let net = MlpNetwork::zeros(&[2, 3], Head::SoftmaxPolicy).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(MlpNetwork::zeros(&[2, 3], Head::ScalarValue).is_err());
        assert!(MlpNetwork::zeros(&[2], Head::ScalarValue).is_err());
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = MlpNetwork::zeros(&[2, 1], Head::ScalarValue).unwrap();
        let (_, cache) = net.forward(&[1.0, 1.0]).unwrap();
        let g = net.backward(&cache, &[1.0]).unwrap();
        net.apply_update(&g, 0.1).unwrap();
        assert!(matches!(net.backward(&cache, &[1.0]), Err(Error::StaleCache)));

        let other = MlpNetwork::zeros(&[2, 1], Head::ScalarValue).unwrap();
        assert!(matches!(other.backward(&cache, &[1.0]), Err(Error::StaleCache)));
    }

    #[test]
    fn update_moves_along_gradient() {
        let mut net = MlpNetwork::zeros(&[1, 1], Head::ScalarValue).unwrap();
        net.weights_mut(0)[0] = 1.0;
        let mut g = GradientSet::zeros_like(&net);
        g.weights[0][0] = 0.5;
        net.apply_update(&g, 0.1).unwrap();
        assert!((net.weights(0)[0] - 1.05).abs() < 1e-15);

        let before = net.clone();
        net.apply_update(&GradientSet::zeros_like(&net), 0.1).unwrap();
        assert!(net.same_parameters(&before));
    }

    #[test]
    fn non_finite_update_rejected() {
        let mut net = MlpNetwork::zeros(&[1, 1], Head::ScalarValue).unwrap();
        let mut g = GradientSet::zeros_like(&net);
        g.biases[0][0] = f64::NAN;
        assert!(matches!(net.apply_update(&g, 0.1), Err(Error::NonFinite(_))));
        assert!(matches!(
            Optimizer::new(OptimizerKind::Adam, &net).ascend(&mut net, &g, 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn adam_first_step_is_sign_scaled() {
        let mut net = MlpNetwork::zeros(&[1, 1], Head::ScalarValue).unwrap();
        let mut g = GradientSet::zeros_like(&net);
        g.weights[0][0] = 4.0;
        g.biases[0][0] = -0.01;
        let mut opt = Optimizer::new(OptimizerKind::Adam, &net);
        opt.ascend(&mut net, &g, 0.1).unwrap();
        assert!((net.weights(0)[0] - 0.1).abs() < 1e-6);
        assert!((net.biases(0)[0] + 0.1).abs() < 1e-4);
    }

    #[test]
    fn softmax_helpers_agree() {
        let z = [1.0, -3.0, 1000.0, 2.5];
        let p = softmax(&z);
        let lp = log_softmax(&z);
        for (a, b) in p.iter().zip(&lp) {
            assert!((a.ln() - b).abs() < 1e-9 || *a < 1e-300);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let bad = "pocar-mlp 1\nhead softmax\nactivation tanh\nlayers 2 2\nweights 0\n1 2\n";
        assert!(MlpNetwork::read_checkpoint(bad.as_bytes()).is_err());
        assert!(MlpNetwork::read_checkpoint("hello".as_bytes()).is_err());
    }
}
