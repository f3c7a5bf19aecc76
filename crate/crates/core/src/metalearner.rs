//! Instance-dependent combination weights learned by a small MLP.
//!
//! [`WeightNet`] maps a feature row to a point of the `M`-simplex. Training
//! minimizes `rule(f_Lambda, batch) + gamma * estimator(f_Lambda, batch)` with
//! Adam, where `f_Lambda` mixes the member predictions with the network
//! output. The gradient is exact: estimator gradients flow through the
//! mixture and the softmax back into every layer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CalEstimatorKind, ScoringRule};
use crate::random::{permutation, RngStream};
use crate::simplex::{combine_row, CredalDataset, Matrix, WeightMatrix};

/// One fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, (out, b)) in out.iter_mut().zip(&self.biases).enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *out = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// Feed-forward network with ReLU hidden layers and a softmax output over `M`.
///
/// Inputs are standardized with a per-column shift and scale stored in the
/// network, so a checkpoint is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightNet {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
}

impl WeightNet {
    /// Fan-in scaled uniform initialization with a zero output layer, so the
    /// untrained net returns `(1/M, ..., 1/M)` everywhere.
    pub fn new(layer_sizes: &[usize], rng: RngStream) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config("network needs input and output sizes".into()));
        }
        if layer_sizes[1..].contains(&0) {
            return Err(Error::Config(format!("layer sizes {layer_sizes:?} contain a zero width")));
        }
        let mut r = rng.rng();
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = 1.0 / libm::sqrt(inputs.max(1) as f64);
                let mut draw = |n: usize| -> Vec<f64> {
                    if l == last {
                        vec![0.0; n]
                    } else {
                        (0..n).map(|_| r.random_range(-bound..bound)).collect()
                    }
                };
                let weights = draw(inputs * outputs);
                let biases = draw(outputs);
                Layer { inputs, outputs, weights, biases }
            })
            .collect();
        let d = layer_sizes[0];
        Ok(Self { layer_sizes: layer_sizes.to_vec(), layers, input_shift: vec![0.0; d], input_scale: vec![1.0; d] })
    }

    /// Network `d -> hidden... -> m`.
    pub fn with_hidden(d: usize, hidden: &[usize], m: usize, rng: RngStream) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(d);
        sizes.extend_from_slice(hidden);
        sizes.push(m);
        Self::new(&sizes, rng)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All trainable parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim("network parameters", self.param_count(), params.len()));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    /// Sets the input standardization `(x - shift) * scale`.
    pub fn set_input_transform(&mut self, shift: Vec<f64>, scale: Vec<f64>) -> Result<()> {
        let d = self.input_dim();
        if shift.len() != d || scale.len() != d {
            return Err(Error::dim("input transform", d, shift.len().max(scale.len())));
        }
        self.input_shift = shift;
        self.input_scale = scale;
        Ok(())
    }

    /// Standardizes inputs by the column mean and standard deviation of `features`.
    pub fn fit_input_transform(&mut self, features: &Matrix) -> Result<()> {
        let d = self.input_dim();
        if features.cols() != d {
            return Err(Error::dim("feature columns", d, features.cols()));
        }
        let n = features.rows().max(1) as f64;
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for c in 0..d {
            let mean = features.iter_rows().map(|r| r[c]).sum::<f64>() / n;
            let var = features.iter_rows().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n;
            shift[c] = mean;
            if var > 1e-24 {
                scale[c] = 1.0 / libm::sqrt(var);
            }
        }
        self.set_input_transform(shift, scale)
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_dim() {
            return Err(Error::dim("feature dimension", self.input_dim(), width));
        }
        Ok(())
    }

    /// Weight vector (a point of the `M`-simplex) for one feature row.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let mut cache = ForwardCache::default();
        Ok(self.forward_cached(x, &mut cache).to_vec())
    }

    /// Runs the network, leaving activations of every layer in `cache`.
    /// Returns the softmax output.
    fn forward_cached<'c>(&self, x: &[f64], cache: &'c mut ForwardCache) -> &'c [f64] {
        cache.acts.resize(self.layers.len() + 1, Vec::new());
        let a0 = &mut cache.acts[0];
        a0.clear();
        a0.extend(x.iter().zip(self.input_shift.iter().zip(&self.input_scale)).map(|(v, (s, c))| (v - s) * c));
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let out = &mut tail[0];
            out.resize(layer.outputs, 0.0);
            layer.forward(&head[l], out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                softmax_in_place(out);
            }
        }
        &cache.acts[last + 1]
    }

    /// Accumulates `d loss / d params` given `d loss / d output` for one row
    /// whose activations are in `cache`.
    fn backward(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64], offsets: &[usize]) {
        let lam = &cache.acts[self.layers.len()];
        let dot: f64 = lam.iter().zip(upstream).map(|(l, g)| l * g).sum();
        let mut delta: Vec<f64> = lam.iter().zip(upstream).map(|(l, g)| l * (g - dot)).collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.acts[l];
            let off = offsets[l];
            let (gw, gb) = grad[off..off + layer.weights.len() + layer.biases.len()].split_at_mut(layer.weights.len());
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, &a) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, &w) in prev.iter_mut().zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs]) {
                    *p += d * w;
                }
            }
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    /// `true` for connection weights, `false` for biases, in parameter order.
    fn weight_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            mask.extend(core::iter::repeat_n(true, l.inputs * l.outputs));
            mask.extend(core::iter::repeat_n(false, l.outputs));
        }
        mask
    }

    fn param_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = off;
                off += l.weights.len() + l.biases.len();
                o
            })
            .collect()
    }
}

#[derive(Debug, Default, Clone)]
struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Evaluates the network on every feature row of `data`.
pub fn evaluate_weights(net: &WeightNet, data: &CredalDataset) -> Result<WeightMatrix> {
    net.check_input(data.d())?;
    if net.output_dim() != data.m() {
        return Err(Error::dim("network outputs", data.m(), net.output_dim()));
    }
    let mut out = Matrix::zeros(data.n(), data.m());
    let mut cache = ForwardCache::default();
    for i in 0..data.n() {
        let lam = net.forward_cached(data.features().row(i), &mut cache);
        out.row_mut(i).copy_from_slice(lam);
    }
    WeightMatrix::new(out)
}

/// Settings of [`train_weight_net`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Calibration penalty evaluated per batch.
    pub estimator: CalEstimatorKind,
    pub scoring_rule: ScoringRule,
    pub gamma: f64,
    pub learning_rate: f64,
    /// `None` trains on the full training slice at once.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub patience: usize,
    pub hidden: Vec<usize>,
    /// Decoupled L2 shrinkage of the connection weights (biases are exempt).
    #[serde(default)]
    pub weight_decay: f64,
    /// Fraction of opt-data (taken from the end) used for early stopping.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Setup for the synthetic scenarios: three hidden layers of 16 units,
    /// full-batch Adam.
    pub fn synthetic(estimator: CalEstimatorKind, seed: u64) -> Self {
        Self {
            estimator,
            scoring_rule: ScoringRule::paired_with(&estimator),
            gamma: 0.01,
            learning_rate: 1e-3,
            batch_size: None,
            epochs: 300,
            patience: 10,
            hidden: vec![16, 16, 16],
            weight_decay: 0.0,
            holdout_fraction: 0.2,
            seed,
        }
    }

    /// Setup for ingested prediction files: one hidden layer of 32 units,
    /// mini-batches of 256.
    pub fn ingested(estimator: CalEstimatorKind, seed: u64) -> Self {
        Self {
            estimator,
            scoring_rule: ScoringRule::paired_with(&estimator),
            gamma: 0.01,
            learning_rate: 1e-4,
            batch_size: Some(256),
            epochs: 200,
            patience: 10,
            hidden: vec![32],
            weight_decay: 0.0,
            holdout_fraction: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma {} must be >= 0", self.gamma)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if let Some(b) = self.batch_size {
            if b == 0 || (self.estimator.is_population() && b < 8) {
                return Err(Error::Config(format!("batch size {b} too small for {}", self.estimator.name())));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight decay {} must be >= 0", self.weight_decay)));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!("holdout fraction {} outside [0, 1)", self.holdout_fraction)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer of width 0".into()));
        }
        self.estimator.validate()
    }
}

/// Progress record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// `0` means the initial (mean-predictor) network was never improved on.
    pub best_epoch: usize,
    pub best_holdout_loss: f64,
    /// Mean batch loss per epoch.
    pub train_losses: Vec<f64>,
    pub holdout_losses: Vec<f64>,
}

/// Combined loss `rule + gamma * estimator` of `net` on the instances `rows`,
/// with the gradient over all network parameters when requested.
pub fn combined_loss(
    net: &WeightNet,
    data: &CredalDataset,
    rows: &[usize],
    config: &TrainConfig,
    with_gradient: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let labels = data.require_labels()?;
    net.check_input(data.d())?;
    if net.output_dim() != data.m() {
        return Err(Error::dim("network outputs", data.m(), net.output_dim()));
    }
    let (k, m) = (data.k(), data.m());
    let b = rows.len();
    let mut caches = vec![ForwardCache::default(); if with_gradient { b } else { 1 }];
    let mut preds = Matrix::zeros(b, k);
    let mut batch_labels = Vec::with_capacity(b);
    for (r, &i) in rows.iter().enumerate() {
        let cache = &mut caches[if with_gradient { r } else { 0 }];
        let lam = net.forward_cached(data.features().row(i), cache);
        combine_row(data.instance(i), lam, k, preds.row_mut(r));
        batch_labels.push(labels[i]);
    }
    let fit = config.scoring_rule.evaluate(&preds, &batch_labels, with_gradient)?;
    let mut value = fit.value;
    let mut dpred = fit.gradient;
    if config.gamma > 0.0 {
        let pen = config.estimator.evaluate(&preds, &batch_labels, with_gradient)?;
        value += config.gamma * pen.value;
        if let (Some(d), Some(g)) = (dpred.as_mut(), pen.gradient) {
            for (a, b) in d.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += config.gamma * b;
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::Numeric(format!("combined loss is {value}")));
    }
    let Some(dpred) = dpred else {
        return Ok((value, None));
    };
    let offsets = net.param_offsets();
    let mut grad = vec![0.0; net.param_count()];
    let mut dlam = vec![0.0; m];
    for (r, &i) in rows.iter().enumerate() {
        let g = dpred.row(r);
        for (mm, d) in dlam.iter_mut().enumerate() {
            *d = data.prediction(i, mm).iter().zip(g).map(|(p, g)| p * g).sum();
        }
        net.backward(&caches[r], &dlam, &mut grad, &offsets);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((value, Some(grad)))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    /// One update; entries with `decay[i]` set are also shrunk by `lr * wd`.
    fn step(&mut self, params: &mut [f64], grad: &[f64], decay: &[bool], wd: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for (((p, g), (m, v)), &shrink) in
            params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())).zip(decay)
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            if shrink {
                *p -= self.lr * wd * *p;
            }
            *p -= self.lr * (*m / c1) / (libm::sqrt(*v / c2) + Self::EPS);
        }
    }
}

/// Trains a [`WeightNet`] on labeled `opt` data.
///
/// The last `holdout_fraction` of the instances is held out; after every
/// epoch the combined loss on that slice is recorded and the best network so
/// far is kept. Training stops after `patience` epochs without improvement.
pub fn train_weight_net(opt: &CredalDataset, config: &TrainConfig) -> Result<(WeightNet, TrainReport)> {
    config.validate()?;
    opt.require_labels()?;
    let stream = RngStream::from_seed(config.seed);
    let mut net = WeightNet::with_hidden(opt.d(), &config.hidden, opt.m(), stream.substream(0))?;
    let n = opt.n();
    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: 0,
        best_holdout_loss: f64::NAN,
        train_losses: Vec::new(),
        holdout_losses: Vec::new(),
    };
    if opt.m() == 1 {
        return Ok((net, report));
    }
    let held = libm::floor(n as f64 * config.holdout_fraction) as usize;
    let min_rows = if config.estimator.is_population() { 4 } else { 1 };
    let (train_n, holdout): (usize, Vec<usize>) =
        if held >= min_rows && n - held >= min_rows { (n - held, (n - held..n).collect()) } else { (n, Vec::new()) };
    net.fit_input_transform(&opt.features().select_rows(&(0..train_n).collect::<Vec<_>>()))?;
    let all_train: Vec<usize> = (0..train_n).collect();
    let monitor = |net: &WeightNet| -> Result<f64> {
        let rows = if holdout.is_empty() { &all_train } else { &holdout };
        Ok(combined_loss(net, opt, rows, config, false)?.0)
    };

    let mut params = net.parameters();
    let mut best = params.clone();
    let mut best_loss = monitor(&net)?;
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let decay = net.weight_mask();
    let mut shuffle = stream.substream(1).rng();
    let batch = config.batch_size.unwrap_or(train_n).min(train_n).max(1);
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let order = permutation(train_n, &mut shuffle);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch) {
            if chunk.len() < min_rows.max(2).min(train_n) || (batches > 0 && chunk.len() < batch / 2) {
                continue;
            }
            let (loss, grad) = combined_loss(&net, opt, chunk, config, true)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
            adam.step(&mut params, &grad.expect("gradient requested"), &decay, config.weight_decay);
            net.set_parameters(&params)?;
            total += loss;
            batches += 1;
        }
        let held_loss = monitor(&net).map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        report.train_losses.push(total / batches.max(1) as f64);
        report.holdout_losses.push(held_loss);
        report.epochs_run = epoch;
        if held_loss < best_loss {
            best_loss = held_loss;
            best.copy_from_slice(&params);
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    net.set_parameters(&best)?;
    report.best_holdout_loss = best_loss;
    Ok((net, report))
}

/// Best constant weight vector on the lattice of spacing `step` over the
/// `M`-simplex, by exhaustive search. Returns the weights and the estimator value.
pub fn grid_search_constant_lambda(
    data: &CredalDataset,
    estimator: &CalEstimatorKind,
    step: f64,
) -> Result<(Vec<f64>, f64)> {
    let labels = data.require_labels()?;
    let m = data.m();
    if m > 4 {
        return Err(Error::Unsupported(format!("constant-weight grid search over M={m} > 4 members")));
    }
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step {step} outside (0, 1]")));
    }
    let ticks = libm::round(1.0 / step).max(1.0) as usize;
    let eval = |w: &[f64]| -> Result<f64> {
        let mut preds = Matrix::zeros(data.n(), data.k());
        for i in 0..data.n() {
            combine_row(data.instance(i), w, data.k(), preds.row_mut(i));
        }
        Ok(estimator.evaluate(&preds, labels, false)?.value)
    };
    if m == 1 {
        return Ok((vec![1.0], eval(&[1.0])?));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut counts = vec![0usize; m];
    let mut w = vec![0.0; m];
    loop {
        let used: usize = counts[..m - 1].iter().sum();
        if used <= ticks {
            counts[m - 1] = ticks - used;
            for (wi, &c) in w.iter_mut().zip(&counts) {
                *wi = c as f64 / ticks as f64;
            }
            let v = eval(&w)?;
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((w.clone(), v));
            }
        }
        // odometer over the first m - 1 coordinates
        let mut pos = 0;
        loop {
            if pos == m - 1 {
                let (w, v) = best.expect("lattice is non-empty");
                return Ok((w, v));
            }
            counts[pos] += 1;
            if counts[..m - 1].iter().sum::<usize>() <= ticks {
                break;
            }
            counts[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::CalEstimatorKind as E;

    fn toy(n: usize, m: usize, seed: u64) -> CredalDataset {
        let mut r = RngStream::from_seed(seed).rng();
        let feats: Vec<[f64; 2]> = (0..n).map(|_| [r.random::<f64>(), r.random::<f64>() * 3.0]).collect();
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            for _ in 0..m {
                let a: f64 = r.random_range(0.05..0.9);
                let b: f64 = r.random_range(0.0..(1.0 - a));
                preds.extend_from_slice(&[a, b, 1.0 - a - b]);
            }
            labels.push(r.random_range(0..3));
        }
        CredalDataset::new(Matrix::from_rows(&feats).unwrap(), m, 3, preds, Some(labels)).unwrap()
    }

    #[test]
    fn untrained_net_is_uniform_and_deterministic() {
        let net = WeightNet::with_hidden(2, &[5, 4], 3, RngStream::from_seed(1)).unwrap();
        let data = toy(10, 3, 2);
        let w = evaluate_weights(&net, &data).unwrap();
        for i in 0..10 {
            for &v in w.row(i) {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert_eq!(net.param_count(), 2 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3);
        let again = WeightNet::with_hidden(2, &[5, 4], 3, RngStream::from_seed(1)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn single_member_is_constant_one() {
        let net = WeightNet::with_hidden(2, &[4], 1, RngStream::from_seed(3)).unwrap();
        assert_eq!(net.forward(&[0.3, 7.0]).unwrap(), vec![1.0]);
        let data = toy(12, 1, 4);
        let cfg = TrainConfig::synthetic(E::Ce2Kde { bandwidth: 0.1 }, 5);
        let (net, report) = train_weight_net(&data, &cfg).unwrap();
        assert_eq!(report.epochs_run, 0);
        assert!(evaluate_weights(&net, &data).unwrap().as_matrix().as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = WeightNet::with_hidden(3, &[4], 2, RngStream::from_seed(3)).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(evaluate_weights(&net, &toy(4, 2, 1)).is_err());
    }

    #[test]
    fn parameters_round_trip() {
        let mut net = WeightNet::with_hidden(2, &[3], 2, RngStream::from_seed(9)).unwrap();
        let mut p = net.parameters();
        p.iter_mut().enumerate().for_each(|(i, v)| *v += i as f64 * 0.01);
        net.set_parameters(&p).unwrap();
        assert_eq!(net.parameters(), p);
        assert!(net.set_parameters(&p[1..]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::synthetic(E::Ce2Kde { bandwidth: 0.1 }, 0);
        cfg.validate().unwrap();
        cfg.batch_size = Some(4);
        assert!(cfg.validate().is_err());
        cfg.estimator = E::Brier;
        cfg.validate().unwrap();
        cfg.gamma = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_search_degenerate_cases() {
        let data = toy(20, 2, 11);
        let (w, v) = grid_search_constant_lambda(&data, &E::Brier, 1.0).unwrap();
        let m0 = crate::estimators::brier_score(&data.member(0), data.labels().unwrap(), false).unwrap().value;
        let m1 = crate::estimators::brier_score(&data.member(1), data.labels().unwrap(), false).unwrap().value;
        assert_eq!(v, m0.min(m1));
        assert_eq!(w[0], if m0 <= m1 { 1.0 } else { 0.0 });
        let single = toy(20, 1, 12);
        let (w, v) = grid_search_constant_lambda(&single, &E::Brier, 0.01).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_eq!(
            v,
            crate::estimators::brier_score(&single.member(0), single.labels().unwrap(), false).unwrap().value
        );
        assert!(matches!(grid_search_constant_lambda(&toy(5, 5, 1), &E::Brier, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn grid_search_visits_the_whole_lattice() {
        // For M = 3 and step 0.25 the lattice has 15 points; Brier is quadratic
        // in lambda, so the minimum over a fine lattice is never above a coarse one.
        let data = toy(30, 3, 13);
        let (_, coarse) = grid_search_constant_lambda(&data, &E::Brier, 0.25).unwrap();
        let (w, fine) = grid_search_constant_lambda(&data, &E::Brier, 0.05).unwrap();
        assert!(fine <= coarse);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
