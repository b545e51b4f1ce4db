//! Feedforward maps with manual backpropagation, the shared substrate of
//! every learned translator, plus finite-difference gradient verification
//! and a deterministic momentum-SGD trainer.

use crate::error::{LabError, Result};
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in the post-activation value.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: y = act(W x + b), W row-major (rows = outputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpMap {
    pub layers: Vec<Layer>,
}

impl MlpMap {
    /// Build a net with the given layer sizes; hidden layers use `act`,
    /// the output layer is linear. Weights are uniform in
    /// [-1/sqrt(fan_in), 1/sqrt(fan_in)] from the deterministic stream.
    pub fn new(sizes: &[usize], act: Activation, rng: &mut CounterRng) -> MlpMap {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::new();
        for (l, pair) in sizes.windows(2).enumerate() {
            let (cols, rows) = (pair[0], pair[1]);
            let scale = 1.0 / (cols as f64).sqrt();
            let w = (0..rows * cols).map(|_| rng.next_symmetric(scale)).collect();
            let b = vec![0.0; rows];
            let layer_act = if l + 2 == sizes.len() { Activation::Identity } else { act };
            layers.push(Layer { rows, cols, w, b, act: layer_act });
        }
        MlpMap { layers }
    }

    pub fn zeroed(sizes: &[usize], act: Activation) -> MlpMap {
        let mut rng = CounterRng::new(0, 0);
        let mut net = MlpMap::new(sizes, act, &mut rng);
        for layer in &mut net.layers {
            layer.w.iter_mut().for_each(|v| *v = 0.0);
        }
        net
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.cols)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.w.len() != layer.rows * layer.cols || layer.b.len() != layer.rows {
                return Err(LabError::Config(format!("layer {i} has inconsistent shapes")));
            }
            if !layer.w.iter().chain(&layer.b).all(|v| v.is_finite()) {
                return Err(LabError::Config(format!("layer {i} has non-finite parameters")));
            }
            if i > 0 && self.layers[i - 1].rows != layer.cols {
                return Err(LabError::Config(format!(
                    "layer {i} input {} does not match previous output {}",
                    layer.cols,
                    self.layers[i - 1].rows
                )));
            }
        }
        Ok(())
    }

    /// Chain `self` then `next` into a single map.
    pub fn compose(&self, next: &MlpMap) -> MlpMap {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        let composed = MlpMap { layers };
        debug_assert!(composed.validate().is_ok());
        composed
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer_forward(layer, &a);
        }
        a
    }

    /// Activations per layer, starting with the input.
    pub fn forward_full(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let next = layer_forward(layer, acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.param_count());
        let mut offset = 0;
        for layer in &mut self.layers {
            let wn = layer.w.len();
            layer.w.copy_from_slice(&theta[offset..offset + wn]);
            offset += wn;
            let bn = layer.b.len();
            layer.b.copy_from_slice(&theta[offset..offset + bn]);
            offset += bn;
        }
    }

    /// Backpropagate `grad_out` (dL/dy) through cached activations.
    /// Returns the flat parameter gradient and dL/dx.
    pub fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let mut g = grad_out.to_vec();
        // parameter offsets per layer
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.w.len() + layer.b.len();
        }
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a_in = &acts[l];
            let a_out = &acts[l + 1];
            let mut dz = vec![0.0; layer.rows];
            for i in 0..layer.rows {
                dz[i] = g[i] * layer.act.derivative_from_output(a_out[i]);
            }
            let base = offsets[l];
            for i in 0..layer.rows {
                let row = base + i * layer.cols;
                for j in 0..layer.cols {
                    grad[row + j] += dz[i] * a_in[j];
                }
            }
            let b_base = base + layer.w.len();
            for i in 0..layer.rows {
                grad[b_base + i] += dz[i];
            }
            let mut g_prev = vec![0.0; layer.cols];
            for i in 0..layer.rows {
                let row = i * layer.cols;
                for j in 0..layer.cols {
                    g_prev[j] += layer.w[row + j] * dz[i];
                }
            }
            g = g_prev;
        }
        (grad, g)
    }
}

fn layer_forward(layer: &Layer, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layer.rows];
    for i in 0..layer.rows {
        let row = i * layer.cols;
        let mut z = layer.b[i];
        for j in 0..layer.cols {
            z += layer.w[row + j] * x[j];
        }
        out[i] = layer.act.apply(z);
    }
    out
}

/// MSE loss (mean over batch and output dims) and its parameter gradient.
pub fn mse_loss_and_grad(
    net: &MlpMap,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let batch = inputs.len();
    let dims = net.out_dim();
    let scale = 1.0 / (batch * dims) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    for (x, t) in inputs.iter().zip(targets) {
        let acts = net.forward_full(x);
        let y = acts.last().unwrap();
        let mut g_out = vec![0.0; dims];
        for i in 0..dims {
            let diff = y[i] - t[i];
            loss += diff * diff * scale;
            g_out[i] = 2.0 * diff * scale;
        }
        let (g, _) = net.backward(&acts, &g_out);
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    (loss, grad)
}

/// Compare an analytic gradient against central finite differences
/// (step 1e-5) coordinate-wise; returns the max relative error with
/// denominator max(|a|, |b|, 1e-8). Empty parameter vectors are
/// vacuously 0.
pub fn grad_check<F>(loss_and_grad: F, theta: &[f64]) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const STEP: f64 = 1e-5;
    let (_, analytic) = loss_and_grad(theta);
    let mut max_rel = 0.0;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + STEP;
        let (up, _) = loss_and_grad(&probe);
        probe[i] = theta[i] - STEP;
        let (down, _) = loss_and_grad(&probe);
        probe[i] = theta[i];
        let fd = (up - down) / (2.0 * STEP);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
        let rel = (analytic[i] - fd).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    max_rel
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 1,
        }
    }
}

/// Mini-batch gradient descent with momentum on the MSE objective.
/// When `trainable_layers` is set, only parameters of that many leading
/// layers are updated (used to train a latent map behind a frozen
/// decoder). Returns the per-epoch loss curve; diverging (non-finite)
/// loss is a training error.
pub fn train_mse(
    net: &mut MlpMap,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    trainable_layers: Option<usize>,
) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(LabError::Training("empty training set".into()));
    }
    if inputs.len() != targets.len() {
        return Err(LabError::Training("inputs/targets length mismatch".into()));
    }
    net.validate()?;
    let trainable = match trainable_layers {
        Some(k) => net
            .layers
            .iter()
            .take(k)
            .map(|l| l.w.len() + l.b.len())
            .sum::<usize>(),
        None => net.param_count(),
    };
    let mut velocity = vec![0.0; net.param_count()];
    let mut indices: Vec<usize> = (0..inputs.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = CounterRng::new(cfg.seed, epoch as u64 + 1);
        rng.shuffle(&mut indices);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in indices.chunks(cfg.batch_size.max(1)) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let (loss, grad) = mse_loss_and_grad(net, &xs, &ts);
            if !loss.is_finite() {
                return Err(LabError::Training(format!(
                    "loss diverged at epoch {epoch}"
                )));
            }
            let mut theta = net.params();
            for i in 0..trainable {
                velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
                theta[i] += velocity[i];
            }
            net.set_params(&theta);
            epoch_loss += loss;
            batches += 1;
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok(curve)
}
