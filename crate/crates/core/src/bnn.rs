//! Fully connected regression network with Monte Carlo dropout.
//!
//! The network maps `k` inputs through ReLU hidden layers to two outputs: the
//! predicted mean and the log-variance `s = log sigma^2` of the noise. Dropout
//! is applied to hidden activations with inverted scaling, both while training
//! and during Monte Carlo prediction, so a pass without dropout needs no
//! rescaling.
//!
//! Parameters live in one flat vector. Layer `l` contributes its weight matrix
//! (`out x in`, row-major) followed by its bias vector. Gradients use the same
//! layout.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, RandomStream};

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const MC_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BnnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}: loss {loss}; lower the learning rate")]
    DivergedTraining { epoch: usize, loss: f64 },
    #[error("need at least 2 forward passes, got {0}")]
    InvalidT(usize),
    #[error("malformed model: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Input width, hidden widths, output width (must be 2).
    pub layer_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub l2_weight: f64,
    pub learning_rate: f64,
    /// When set, the step size decays geometrically per epoch from
    /// `learning_rate` to this value at the last epoch.
    pub final_learning_rate: Option<f64>,
    pub momentum: f64,
    /// Rescale each minibatch gradient to at most this Euclidean norm.
    pub grad_clip: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub mc_passes: usize,
    pub master_seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            layer_sizes: vec![1, 100, 100, 100, 2],
            dropout_rate: 0.1,
            l2_weight: 1e-5,
            learning_rate: 1e-3,
            final_learning_rate: None,
            momentum: 0.9,
            grad_clip: Some(10.0),
            epochs: 1000,
            batch_size: 32,
            mc_passes: 50,
            master_seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), BnnError> {
        check_layer_sizes(&self.layer_sizes)?;
        let bad = |m: &str| Err(BnnError::InvalidConfig(m.into()));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.l2_weight.is_finite() && self.l2_weight >= 0.0) {
            return bad("l2_weight must be finite and non-negative");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self
            .final_learning_rate
            .is_some_and(|r| !(r.is_finite() && r > 0.0))
        {
            return bad("final_learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.grad_clip.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.mc_passes == 0 {
            return bad("epochs, batch_size and mc_passes must be at least 1");
        }
        Ok(())
    }
}

impl MlpConfig {
    /// Step size used during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.final_learning_rate {
            Some(last) if self.epochs > 1 => {
                let t = (epoch.saturating_sub(1)) as f64 / (self.epochs - 1) as f64;
                self.learning_rate * (last / self.learning_rate).powf(t)
            }
            _ => self.learning_rate,
        }
    }
}

fn check_layer_sizes(sizes: &[usize]) -> Result<(), BnnError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(BnnError::InvalidConfig(format!(
            "bad layer sizes {sizes:?}"
        )));
    }
    if *sizes.last().unwrap() != 2 {
        return Err(BnnError::InvalidConfig(
            "output layer must have width 2".into(),
        ));
    }
    Ok(())
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    weights: usize,
    biases: usize,
    n_in: usize,
    n_out: usize,
}

#[derive(Deserialize)]
struct RawMlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

impl TryFrom<RawMlp> for Mlp {
    type Error = BnnError;

    fn try_from(raw: RawMlp) -> Result<Self, Self::Error> {
        Mlp::from_params(raw.layer_sizes, raw.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp")]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-hidden-layer multipliers: 0 for a dropped unit, `1 / (1 - rate)` for a
/// kept one.
pub type DropoutMasks = Vec<Vec<f64>>;

impl Mlp {
    pub fn zeros(layer_sizes: Vec<usize>) -> Result<Self, BnnError> {
        check_layer_sizes(&layer_sizes)?;
        let params = vec![0.0; param_count(&layer_sizes)];
        Ok(Mlp {
            layer_sizes,
            params,
        })
    }

    pub fn from_params(layer_sizes: Vec<usize>, params: Vec<f64>) -> Result<Self, BnnError> {
        check_layer_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if params.len() != expected {
            return Err(BnnError::ShapeMismatch {
                expected,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(BnnError::Malformed("non-finite parameter".into()));
        }
        Ok(Mlp {
            layer_sizes,
            params,
        })
    }

    /// He-normal weights, zero biases.
    pub fn init(layer_sizes: Vec<usize>, rng: &mut RandomStream) -> Result<Self, BnnError> {
        let mut net = Mlp::zeros(layer_sizes)?;
        for slot in net.slots() {
            let scale = (2.0 / slot.n_in as f64).sqrt();
            for w in &mut net.params[slot.weights..slot.biases] {
                *w = scale * rng.standard_normal();
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn slots(&self) -> Vec<Slot> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let slot = Slot {
                    weights: offset,
                    biases: offset + w[0] * w[1],
                    n_in: w[0],
                    n_out: w[1],
                };
                offset = slot.biases + w[1];
                slot
            })
            .collect()
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.slots()
            .iter()
            .flat_map(|s| &self.params[s.weights..s.biases])
            .map(|w| w * w)
            .sum()
    }

    /// Draws one mask per hidden unit. A rate of 0 keeps everything.
    pub fn sample_masks(&self, dropout_rate: f64, rng: &mut RandomStream) -> DropoutMasks {
        let hidden = &self.layer_sizes[1..self.layer_sizes.len() - 1];
        if dropout_rate == 0.0 {
            return hidden.iter().map(|&h| vec![1.0; h]).collect();
        }
        let keep = 1.0 / (1.0 - dropout_rate);
        hidden
            .iter()
            .map(|&h| {
                (0..h)
                    .map(|_| {
                        if rng.random::<f64>() < dropout_rate {
                            0.0
                        } else {
                            keep
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), BnnError> {
        if x.len() == self.n_inputs() {
            Ok(())
        } else {
            Err(BnnError::ShapeMismatch {
                expected: self.n_inputs(),
                found: x.len(),
            })
        }
    }

    /// Forward pass keeping the layer inputs and hidden pre-activations.
    fn trace(&self, x: &[f64], masks: Option<&DropoutMasks>) -> Trace {
        let slots = self.slots();
        let mut inputs = Vec::with_capacity(slots.len());
        let mut pre = Vec::with_capacity(slots.len() - 1);
        let mut a = x.to_vec();
        for (l, slot) in slots.iter().enumerate() {
            let w = &self.params[slot.weights..slot.biases];
            let b = &self.params[slot.biases..slot.biases + slot.n_out];
            let z: Vec<f64> = (0..slot.n_out)
                .map(|j| b[j] + crate::numerics::dot(&w[j * slot.n_in..(j + 1) * slot.n_in], &a))
                .collect();
            inputs.push(std::mem::take(&mut a));
            if l + 1 == slots.len() {
                return Trace {
                    inputs,
                    pre,
                    out: (z[0], z[1]),
                };
            }
            a = match masks {
                Some(m) => z.iter().zip(&m[l]).map(|(&v, &k)| v.max(0.0) * k).collect(),
                None => z.iter().map(|&v| v.max(0.0)).collect(),
            };
            pre.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// `(mean, log_variance)` with explicit masks, or no dropout for `None`.
    pub fn forward_masked(
        &self,
        x: &[f64],
        masks: Option<&DropoutMasks>,
    ) -> Result<(f64, f64), BnnError> {
        self.check_input(x)?;
        Ok(self.trace(x, masks).out)
    }

    /// Backpropagates `d loss / d (mean, log_variance)` and adds the parameter
    /// gradient into `grad`.
    fn backward(
        &self,
        trace: &Trace,
        masks: Option<&DropoutMasks>,
        d_out: [f64; 2],
        grad: &mut [f64],
    ) {
        let slots = self.slots();
        let mut delta = d_out.to_vec();
        for (l, slot) in slots.iter().enumerate().rev() {
            let a = &trace.inputs[l];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row =
                    &mut grad[slot.weights + j * slot.n_in..slot.weights + (j + 1) * slot.n_in];
                for (g, &ai) in row.iter_mut().zip(a) {
                    *g += d * ai;
                }
                grad[slot.biases + j] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[slot.weights..slot.biases];
            let mut da = vec![0.0; slot.n_in];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (v, &wji) in da.iter_mut().zip(&w[j * slot.n_in..(j + 1) * slot.n_in]) {
                    *v += d * wji;
                }
            }
            let z = &trace.pre[l - 1];
            delta = match masks {
                Some(m) => da
                    .iter()
                    .zip(z)
                    .zip(&m[l - 1])
                    .map(|((&g, &zi), &k)| if zi > 0.0 { g * k } else { 0.0 })
                    .collect(),
                None => da
                    .iter()
                    .zip(z)
                    .map(|(&g, &zi)| if zi > 0.0 { g } else { 0.0 })
                    .collect(),
            };
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BnnError> {
        serde_json::from_str(text).map_err(|e| BnnError::Malformed(e.to_string()))
    }
}

struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    out: (f64, f64),
}

/// One forward pass. With `rng` present and a positive rate, a fresh dropout
/// mask is drawn; with `rng = None` the pass is deterministic.
pub fn forward(
    net: &Mlp,
    x: &[f64],
    dropout_rate: f64,
    rng: Option<&mut RandomStream>,
) -> Result<(f64, f64), BnnError> {
    match rng {
        Some(rng) if dropout_rate > 0.0 => {
            let masks = net.sample_masks(dropout_rate, rng);
            net.forward_masked(x, Some(&masks))
        }
        _ => net.forward_masked(x, None),
    }
}

/// `(y - mean)^2 / (2 sigma^2) + log(sigma^2) / 2` with `sigma^2 = exp(log_variance)`.
pub fn sample_loss(y: f64, mean: f64, log_variance: f64) -> f64 {
    let r = y - mean;
    0.5 * (-log_variance).exp() * r * r + 0.5 * log_variance
}

/// Mean per-sample loss plus `l2_weight` times the squared weight norm.
pub fn attenuated_loss(
    preds: &[(f64, f64)],
    targets: &[f64],
    l2_weight: f64,
    net: &Mlp,
) -> Result<f64, BnnError> {
    if preds.len() != targets.len() {
        return Err(BnnError::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(BnnError::LengthMismatch { left: 0, right: 1 });
    }
    let data: f64 = preds
        .iter()
        .zip(targets)
        .map(|(&(m, s), &y)| sample_loss(y, m, s))
        .sum();
    Ok(data / preds.len() as f64 + l2_weight * net.weight_norm_sq())
}

fn check_data(net: &Mlp, x: &Matrix, y: &[f64]) -> Result<(), BnnError> {
    if x.rows() != y.len() {
        return Err(BnnError::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if x.rows() == 0 {
        return Err(BnnError::LengthMismatch { left: 0, right: 1 });
    }
    if x.cols() != net.n_inputs() {
        return Err(BnnError::ShapeMismatch {
            expected: net.n_inputs(),
            found: x.cols(),
        });
    }
    Ok(())
}

/// Loss and its gradient over the rows in `batch`; `masks[i]` belongs to
/// `batch[i]`.
fn batch_loss_and_gradient(
    net: &Mlp,
    x: &Matrix,
    y: &[f64],
    batch: &[usize],
    l2_weight: f64,
    masks: Option<&[DropoutMasks]>,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.params.len()];
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (i, &row) in batch.iter().enumerate() {
        let m = masks.map(|m| &m[i]);
        let trace = net.trace(x.row(row), m);
        let (mean, s) = trace.out;
        let r = y[row] - mean;
        let inv_var = (-s).exp();
        total += 0.5 * inv_var * r * r + 0.5 * s;
        let d_mean = -inv_var * r * scale;
        let d_s = (0.5 - 0.5 * inv_var * r * r) * scale;
        net.backward(&trace, m, [d_mean, d_s], &mut grad);
    }
    for slot in net.slots() {
        for p in slot.weights..slot.biases {
            grad[p] += 2.0 * l2_weight * net.params[p];
        }
    }
    (total * scale + l2_weight * net.weight_norm_sq(), grad)
}

/// Attenuated loss over all rows of `x` and its gradient. `masks`, when given,
/// holds one dropout mask per row.
pub fn loss_and_gradient(
    net: &Mlp,
    x: &Matrix,
    y: &[f64],
    l2_weight: f64,
    masks: Option<&[DropoutMasks]>,
) -> Result<(f64, Vec<f64>), BnnError> {
    check_data(net, x, y)?;
    if let Some(m) = masks {
        if m.len() != x.rows() {
            return Err(BnnError::LengthMismatch {
                left: m.len(),
                right: x.rows(),
            });
        }
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(batch_loss_and_gradient(net, x, y, &rows, l2_weight, masks))
}

/// Loss of the deterministic (no dropout) network over all rows.
pub fn evaluate_loss(net: &Mlp, x: &Matrix, y: &[f64], l2_weight: f64) -> Result<f64, BnnError> {
    check_data(net, x, y)?;
    let preds: Vec<(f64, f64)> = x.iter_rows().map(|r| net.trace(r, None).out).collect();
    attenuated_loss(&preds, y, l2_weight, net)
}

/// Deterministic full-data loss before training and after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingLog {
    pub losses: Vec<f64>,
}

impl TrainingLog {
    pub fn initial(&self) -> f64 {
        self.losses[0]
    }

    pub fn last(&self) -> f64 {
        *self.losses.last().expect("log has an initial entry")
    }

    /// CSV with columns `epoch,loss`; epoch 0 is the untrained network.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["epoch", "loss"])?;
        for (epoch, loss) in self.losses.iter().enumerate() {
            wtr.write_record([epoch.to_string(), format!("{loss:.17e}")])?;
        }
        wtr.flush()
    }
}

/// Minibatch SGD with momentum on the attenuated loss, dropout active.
pub fn train(x: &Matrix, y: &[f64], config: &MlpConfig) -> Result<(Mlp, TrainingLog), BnnError> {
    config.validate()?;
    let mut net = Mlp::init(
        config.layer_sizes.clone(),
        &mut RandomStream::new(config.master_seed, INIT_STREAM),
    )?;
    check_data(&net, x, y)?;
    if x.rows() < config.batch_size {
        return Err(BnnError::InvalidConfig(format!(
            "batch_size {} exceeds the {} training rows",
            config.batch_size,
            x.rows()
        )));
    }
    let diverged = |epoch, loss: f64| BnnError::DivergedTraining { epoch, loss };
    let initial = evaluate_loss(&net, x, y, config.l2_weight)?;
    if !initial.is_finite() {
        return Err(diverged(0, initial));
    }
    let mut losses = vec![initial];
    let mut velocity = vec![0.0; net.params.len()];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let shuffle_root = RandomStream::new(config.master_seed, SHUFFLE_STREAM);
    let dropout_root = RandomStream::new(config.master_seed, DROPOUT_STREAM);
    for epoch in 1..=config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut shuffle_root.child(epoch as u64));
        let mut drop_rng = dropout_root.child(epoch as u64);
        for batch in order.chunks(config.batch_size) {
            let masks: Vec<DropoutMasks> = batch
                .iter()
                .map(|_| net.sample_masks(config.dropout_rate, &mut drop_rng))
                .collect();
            let (loss, mut grad) =
                batch_loss_and_gradient(&net, x, y, batch, config.l2_weight, Some(&masks));
            if !loss.is_finite() {
                return Err(diverged(epoch, loss));
            }
            if let Some(clip) = config.grad_clip {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > clip {
                    grad.iter_mut().for_each(|g| *g *= clip / norm);
                }
            }
            for ((p, v), g) in net.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - lr * g;
                *p += *v;
            }
        }
        let loss = evaluate_loss(&net, x, y, config.l2_weight)?;
        if !loss.is_finite() {
            return Err(diverged(epoch, loss));
        }
        losses.push(loss);
    }
    Ok((net, TrainingLog { losses }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McPrediction {
    pub mean: f64,
    pub epistemic_var: f64,
    pub aleatoric_var: f64,
    pub total_var: f64,
    /// `(mean, sigma^2)` of each pass, in pass order.
    pub samples: Vec<(f64, f64)>,
}

/// Runs `config.mc_passes` dropout passes. Pass `t` draws its masks from its
/// own derived stream, so pass `t` uses the same sampled network for every
/// input and the result does not depend on scheduling.
pub fn mc_predict(net: &Mlp, x: &[f64], config: &MlpConfig) -> Result<McPrediction, BnnError> {
    let t = config.mc_passes;
    if t < 2 {
        return Err(BnnError::InvalidT(t));
    }
    net.check_input(x)?;
    let root = RandomStream::new(config.master_seed, MC_STREAM);
    let samples: Vec<(f64, f64)> = (0..t)
        .into_par_iter()
        .map(|pass| {
            let mut rng = root.child(pass as u64);
            let (m, s) = forward(net, x, config.dropout_rate, Some(&mut rng))?;
            Ok((m, s.exp()))
        })
        .collect::<Result<_, BnnError>>()?;
    let tf = t as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / tf;
    // shifted data keeps identical passes at exactly zero variance
    let origin = samples[0].0;
    let d_mean = samples.iter().map(|s| s.0 - origin).sum::<f64>() / tf;
    let d_sq = samples.iter().map(|s| (s.0 - origin).powi(2)).sum::<f64>() / tf;
    let epistemic_var = (d_sq - d_mean * d_mean).max(0.0);
    let aleatoric_var = samples.iter().map(|s| s.1).sum::<f64>() / tf;
    Ok(McPrediction {
        mean,
        epistemic_var,
        aleatoric_var,
        total_var: epistemic_var + aleatoric_var,
        samples,
    })
}

/// [`mc_predict`] for every row of `x`, in row order.
pub fn mc_predict_batch(
    net: &Mlp,
    x: &Matrix,
    config: &MlpConfig,
) -> Result<Vec<McPrediction>, BnnError> {
    (0..x.rows())
        .into_par_iter()
        .map(|i| mc_predict(net, x.row(i), config))
        .collect()
}
