//! Feed-forward network: input batch normalization, ReLU hidden layers with inverted
//! dropout, and a single sigmoid output trained with Adam on binary cross-entropy.
//!
//! All trainable values live in one flat vector so the optimizer and the
//! finite-difference checks can treat them uniformly. Dense weights are stored
//! `[in][out]`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, Classifier};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    /// Trailing share of the shuffled training rows held out for early stopping.
    pub validation_fraction: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub seed: u64,
    /// Start the output layer at zero so every initial score is 0.5.
    pub zero_output_init: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64, 32],
            dropout: 0.3,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 512,
            max_epochs: 100,
            patience: 5,
            validation_fraction: 0.1,
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
            seed: 0,
            zero_output_init: false,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("batch_size and layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean batch loss and accuracy over the epoch, in training mode (dropout and batch statistics on).
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DenseLayout {
    n_in: usize,
    n_out: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdamState<T> {
    pub step: u64,
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    n_features: usize,
    params: Vec<T>,
    layers: Vec<DenseLayout>,
    running_mean: Vec<T>,
    running_var: Vec<T>,
    bn_epsilon: T,
    dropout: f64,
    history: Vec<EpochStats>,
    best_epoch: usize,
    optimizer: Option<AdamState<T>>,
}

/// Batch normalization mode during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Norm {
    /// Normalize with the batch's own statistics.
    Batch,
    /// Normalize with the running statistics.
    Running,
}

struct Tape<T> {
    /// Normalized inputs before the affine scale/shift.
    x_hat: Vec<T>,
    /// Input to each dense layer (post-activation, post-dropout).
    inputs: Vec<Vec<T>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<T>>,
    /// Dropout multipliers per hidden layer (0 or 1/keep); empty when dropout is off.
    masks: Vec<Vec<T>>,
    logits: Vec<T>,
    batch_mean: Vec<T>,
    batch_var: Vec<T>,
}

/// Inverted-dropout multipliers: each entry is 0 with probability `rate`, else `1/(1-rate)`.
pub(crate) fn dropout_mask<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..n).map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep }).collect()
}

/// Numerically stable binary cross-entropy on a logit.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::of(super::boost::sigmoid(z.as_f64()))
}

impl<T: Scalar> Mlp<T> {
    /// Builds an untrained network with He-uniform hidden layers and a Glorot-uniform output.
    pub fn new(n_features: usize, config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::fit("mlp", "no feature columns"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = n_features;
        let mut params = vec![T::one(); d];
        params.extend(std::iter::repeat_n(T::zero(), d));
        let mut layers = Vec::new();
        let mut widths = vec![d];
        widths.extend(&config.hidden);
        widths.push(1);
        for (li, w) in widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let output = li == widths.len() - 2;
            let limit = if output {
                (6.0 / (n_in + n_out) as f64).sqrt()
            } else {
                (6.0 / n_in as f64).sqrt()
            };
            let weights = params.len();
            for _ in 0..n_in * n_out {
                let v = if output && config.zero_output_init { 0.0 } else { rng.gen_range(-limit..limit) };
                params.push(T::of(v));
            }
            let bias = params.len();
            params.extend(std::iter::repeat_n(T::zero(), n_out));
            layers.push(DenseLayout { n_in, n_out, weights, bias });
        }
        Ok(Self {
            n_features,
            params,
            layers,
            running_mean: vec![T::zero(); d],
            running_var: vec![T::one(); d],
            bn_epsilon: T::of(config.bn_epsilon),
            dropout: config.dropout,
            history: Vec::new(),
            best_epoch: 0,
            optimizer: None,
        })
    }

    pub fn fit(train: &ColumnarTable<T>, config: &MlpConfig) -> Result<Self> {
        let mut model = Self::new(train.n_features(), config)?;
        model.train(train, config)?;
        Ok(model)
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    /// Epoch (1-based) whose weights were kept.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    #[cfg(test)]
    pub(crate) fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn gamma(&self) -> &[T] {
        &self.params[..self.n_features]
    }

    fn beta(&self) -> &[T] {
        &self.params[self.n_features..2 * self.n_features]
    }

    fn forward(&self, x: &[T], m: usize, norm: Norm, mut rng: Option<&mut ChaCha8Rng>) -> Tape<T> {
        let d = self.n_features;
        let (mean, var) = match norm {
            Norm::Running => (self.running_mean.clone(), self.running_var.clone()),
            Norm::Batch => {
                let inv_m = T::one() / T::of_usize(m);
                let mut mean = vec![T::zero(); d];
                for row in x.chunks_exact(d) {
                    for (a, &v) in mean.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                mean.iter_mut().for_each(|a| *a *= inv_m);
                let mut var = vec![T::zero(); d];
                for row in x.chunks_exact(d) {
                    for ((a, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
                        *a += (v - mu) * (v - mu);
                    }
                }
                var.iter_mut().for_each(|a| *a *= inv_m);
                (mean, var)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.bn_epsilon).sqrt()).collect();
        let (gamma, beta) = (self.gamma(), self.beta());
        let mut x_hat = Vec::with_capacity(m * d);
        let mut a = Vec::with_capacity(m * d);
        for row in x.chunks_exact(d) {
            for j in 0..d {
                let h = (row[j] - mean[j]) * inv_std[j];
                x_hat.push(h);
                a.push(gamma[j] * h + beta[j]);
            }
        }

        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut masks = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            let z = self.dense(layer, &a, m);
            inputs.push(a);
            if li + 1 == n_layers {
                return Tape { x_hat, inputs, pre, masks, logits: z, batch_mean: mean, batch_var: var };
            }
            let mut h: Vec<T> = z.iter().map(|&v| v.max(T::zero())).collect();
            if let Some(rng) = rng.as_deref_mut() {
                if self.dropout > 0.0 {
                    let mask = dropout_mask(rng, h.len(), self.dropout);
                    h.iter_mut().zip(&mask).for_each(|(v, &k)| *v *= k);
                    masks.push(mask);
                }
            }
            pre.push(z);
            a = h;
        }
        unreachable!("network has an output layer")
    }

    fn dense(&self, layer: &DenseLayout, a: &[T], m: usize) -> Vec<T> {
        let (n_in, n_out) = (layer.n_in, layer.n_out);
        let w = &self.params[layer.weights..layer.weights + n_in * n_out];
        let b = &self.params[layer.bias..layer.bias + n_out];
        let mut out = Vec::with_capacity(m * n_out);
        for row in a.chunks_exact(n_in) {
            let start = out.len();
            out.extend_from_slice(b);
            let o = &mut out[start..];
            for (k, &av) in row.iter().enumerate() {
                if av == T::zero() {
                    continue;
                }
                for (ov, &wv) in o.iter_mut().zip(&w[k * n_out..(k + 1) * n_out]) {
                    *ov += av * wv;
                }
            }
        }
        out
    }

    /// Mean loss over the batch and its gradient with respect to every parameter.
    fn backward(&self, tape: &Tape<T>, y: &[u8], grad: &mut [T]) -> f64 {
        let m = y.len();
        grad.iter_mut().for_each(|g| *g = T::zero());
        let inv_m = T::one() / T::of_usize(m);
        let mut loss = 0.0;
        let mut delta: Vec<T> = tape
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| {
                loss += bce_with_logit(z.as_f64(), f64::from(t));
                (sigmoid(z) - T::of(f64::from(t))) * inv_m
            })
            .collect();

        for li in (0..self.layers.len()).rev() {
            let layer = self.layers[li];
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            let a = &tape.inputs[li];
            {
                let (head, tail) = grad.split_at_mut(layer.bias);
                let gw = &mut head[layer.weights..layer.weights + n_in * n_out];
                let gb = &mut tail[..n_out];
                for (arow, drow) in a.chunks_exact(n_in).zip(delta.chunks_exact(n_out)) {
                    for (g, &dv) in gb.iter_mut().zip(drow) {
                        *g += dv;
                    }
                    for (k, &av) in arow.iter().enumerate() {
                        if av == T::zero() {
                            continue;
                        }
                        for (g, &dv) in gw[k * n_out..(k + 1) * n_out].iter_mut().zip(drow) {
                            *g += av * dv;
                        }
                    }
                }
            }
            let w = &self.params[layer.weights..layer.weights + n_in * n_out];
            let mut w_t = vec![T::zero(); n_in * n_out];
            for k in 0..n_in {
                for o in 0..n_out {
                    w_t[o * n_in + k] = w[k * n_out + o];
                }
            }
            let mut upstream = vec![T::zero(); m * n_in];
            for (urow, drow) in upstream.chunks_exact_mut(n_in).zip(delta.chunks_exact(n_out)) {
                for (o, &dv) in drow.iter().enumerate() {
                    if dv == T::zero() {
                        continue;
                    }
                    for (u, &wv) in urow.iter_mut().zip(&w_t[o * n_in..(o + 1) * n_in]) {
                        *u += wv * dv;
                    }
                }
            }
            if li > 0 {
                let z = &tape.pre[li - 1];
                if let Some(mask) = tape.masks.get(li - 1) {
                    upstream.iter_mut().zip(mask).for_each(|(u, &k)| *u *= k);
                }
                upstream.iter_mut().zip(z).for_each(|(u, &zv)| {
                    if zv <= T::zero() {
                        *u = T::zero();
                    }
                });
            }
            delta = upstream;
        }

        let d = self.n_features;
        let (g_gamma, rest) = grad.split_at_mut(d);
        let g_beta = &mut rest[..d];
        for (drow, hrow) in delta.chunks_exact(d).zip(tape.x_hat.chunks_exact(d)) {
            for j in 0..d {
                g_gamma[j] += drow[j] * hrow[j];
                g_beta[j] += drow[j];
            }
        }
        loss / m as f64
    }

    fn gather(table: &ColumnarTable<T>, rows: &[usize]) -> Vec<T> {
        let d = table.n_features();
        let mut x = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            for c in 0..d {
                x.push(table.value(r, c));
            }
        }
        x
    }

    /// Loss and accuracy over `rows` in inference mode.
    fn evaluate(&self, table: &ColumnarTable<T>, rows: &[usize]) -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for chunk in rows.chunks(4096) {
            let x = Self::gather(table, chunk);
            let tape = self.forward(&x, chunk.len(), Norm::Running, None);
            for (&z, &r) in tape.logits.iter().zip(chunk) {
                let y = table.labels()[r];
                loss += bce_with_logit(z.as_f64(), f64::from(y));
                correct += usize::from(u8::from(z > T::zero()) == y);
            }
        }
        let n = rows.len().max(1) as f64;
        (loss / n, correct as f64 / n)
    }

    fn train(&mut self, train: &ColumnarTable<T>, config: &MlpConfig) -> Result<()> {
        let n = train.n_rows();
        let counts = train.class_counts();
        if counts.contains(&0) {
            return Err(Error::fit("mlp", format!("both classes required, class counts {counts:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let n_val = if n >= 10 { (n as f64 * config.validation_fraction).round() as usize } else { 0 };
        let (fit_rows, val_rows) = order.split_at(n - n_val);
        let mut fit_rows = fit_rows.to_vec();

        let p = self.params.len();
        let mut adam = AdamState { step: 0, first_moment: vec![T::zero(); p], second_moment: vec![T::zero(); p] };
        let mut grad = vec![T::zero(); p];
        let (b1, b2) = (T::of(config.beta1), T::of(config.beta2));
        let (lr, eps) = (config.learning_rate, T::of(config.adam_epsilon));
        let momentum = T::of(config.bn_momentum);

        let mut best: Option<(f64, Vec<T>, Vec<T>, Vec<T>)> = None;
        let mut since_best = 0;
        self.history.clear();
        for epoch in 1..=config.max_epochs {
            fit_rows.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for (bi, batch) in fit_rows.chunks(config.batch_size).enumerate() {
                let m = batch.len();
                let x = Self::gather(train, batch);
                let y: Vec<u8> = batch.iter().map(|&r| train.labels()[r]).collect();
                let norm = if m > 1 { Norm::Batch } else { Norm::Running };
                let tape = self.forward(&x, m, norm, Some(&mut rng));
                let loss = self.backward(&tape, &y, &mut grad);
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::fit("mlp", format!("non-finite loss at epoch {epoch}, batch {}", bi + 1)));
                }
                loss_sum += loss * m as f64;
                correct += tape.logits.iter().zip(&y).filter(|(&z, &t)| u8::from(z > T::zero()) == t).count();

                if norm == Norm::Batch {
                    let rest = T::one() - momentum;
                    for j in 0..self.n_features {
                        self.running_mean[j] = momentum * self.running_mean[j] + rest * tape.batch_mean[j];
                        self.running_var[j] = momentum * self.running_var[j] + rest * tape.batch_var[j];
                    }
                }

                adam.step += 1;
                let t = adam.step as i32;
                let step = T::of(lr * (1.0 - config.beta2.powi(t)).sqrt() / (1.0 - config.beta1.powi(t)));
                for i in 0..p {
                    let g = grad[i];
                    let m1 = b1 * adam.first_moment[i] + (T::one() - b1) * g;
                    let m2 = b2 * adam.second_moment[i] + (T::one() - b2) * g * g;
                    adam.first_moment[i] = m1;
                    adam.second_moment[i] = m2;
                    self.params[i] -= step * m1 / (m2.sqrt() + eps);
                }
            }

            let train_loss = loss_sum / fit_rows.len() as f64;
            let train_accuracy = correct as f64 / fit_rows.len() as f64;
            let (val_loss, val_accuracy) = if val_rows.is_empty() {
                (None, None)
            } else {
                let (l, a) = self.evaluate(train, val_rows);
                (Some(l), Some(a))
            };
            self.history.push(EpochStats { epoch, train_loss, train_accuracy, val_loss, val_accuracy });
            let monitored = val_loss.unwrap_or(train_loss);
            if !monitored.is_finite() {
                return Err(Error::fit("mlp", format!("non-finite validation loss at epoch {epoch}")));
            }
            if best.as_ref().is_none_or(|(b, ..)| monitored < *b) {
                best = Some((monitored, self.params.clone(), self.running_mean.clone(), self.running_var.clone()));
                self.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
        if let Some((_, params, mean, var)) = best {
            self.params = params;
            self.running_mean = mean;
            self.running_var = var;
        }
        self.optimizer = Some(adam);
        Ok(())
    }

    /// Mean loss and parameter gradient on a batch with dropout off and running statistics.
    pub(crate) fn loss_and_gradient(&self, x: &[T], y: &[u8]) -> (f64, Vec<T>) {
        let tape = self.forward(x, y.len(), Norm::Running, None);
        let mut grad = vec![T::zero(); self.params.len()];
        let loss = self.backward(&tape, y, &mut grad);
        (loss, grad)
    }

    pub(crate) fn loss(&self, x: &[T], y: &[u8]) -> f64 {
        let tape = self.forward(x, y.len(), Norm::Running, None);
        tape.logits.iter().zip(y).map(|(&z, &t)| bce_with_logit(z.as_f64(), f64::from(t))).sum::<f64>()
            / y.len() as f64
    }
}

/// Outcome of comparing backpropagated gradients with central finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose ±step perturbation flips a ReLU, where differences are not a valid reference.
    pub skipped_at_kinks: usize,
}

impl Mlp<f64> {
    /// Checks every parameter gradient on `table` with dropout off and running batch-norm
    /// statistics. Relative error is `|a - n| / max(|a|, |n|)`, ignoring pairs below 1e-7.
    pub fn gradient_check(&self, table: &ColumnarTable<f64>, step: f64) -> Result<GradientCheck> {
        check_width(self.n_features, table)?;
        let rows: Vec<usize> = (0..table.n_rows()).collect();
        let x = Self::gather(table, &rows);
        let y = table.labels();
        let (_, grad) = self.loss_and_gradient(&x, y);
        let pattern = |m: &Self| -> Vec<bool> {
            m.forward(&x, y.len(), Norm::Running, None).pre.iter().flatten().map(|&z| z > 0.0).collect()
        };
        let base = pattern(self);
        let mut probe = self.clone();
        let mut out = GradientCheck { max_relative_error: 0.0, checked: 0, skipped_at_kinks: 0 };
        for i in 0..self.params.len() {
            let orig = self.params[i];
            probe.params[i] = orig + step;
            let (up, up_pattern) = (probe.loss(&x, y), pattern(&probe));
            probe.params[i] = orig - step;
            let (down, down_pattern) = (probe.loss(&x, y), pattern(&probe));
            probe.params[i] = orig;
            if up_pattern != base || down_pattern != base {
                out.skipped_at_kinks += 1;
                continue;
            }
            out.checked += 1;
            let numeric = (up - down) / (2.0 * step);
            let scale = grad[i].abs().max(numeric.abs());
            if scale > 1e-7 {
                out.max_relative_error = out.max_relative_error.max((grad[i] - numeric).abs() / scale);
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Classifier<T> for Mlp<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>> {
        check_width(self.n_features, x)?;
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(4096) {
            let batch = Self::gather(x, chunk);
            let tape = self.forward(&batch, chunk.len(), Norm::Running, None);
            out.extend(tape.logits.into_iter().map(sigmoid));
        }
        Ok(out)
    }
}
