//! Time-delayed LSTM regression from audio features to PCA mouth coefficients.
//!
//! The network is strictly causal; lookahead comes from the delay: during
//! training the target at step `t` is the mouth shape of frame `t − d`, so by
//! the time the network emits frame `t − d` it has seen `d` frames of future
//! audio. At inference the raw outputs are shifted back by `d` and the last
//! `d` frames repeat the final emitted value.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioFeatureSequence;
use crate::checkpoint::{Checkpoint, Tensor};
use crate::error::{Error, Result};
use crate::optim::{clip_global_norm, Optimizer, OptimizerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub delay_frames: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerChoice,
    /// Global gradient-norm clip per update; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            input_dim: 26,
            output_dim: 5,
            hidden_size: 60,
            layers: 1,
            delay_frames: 20,
            learning_rate: 3e-3,
            epochs: 50,
            seed: 0,
            optimizer: OptimizerChoice::Adam,
            grad_clip: 5.0,
        }
    }
}

impl PredictorConfig {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_size == 0 || self.layers == 0 {
            return Err(Error::InvalidParams(format!("bad predictor config {self:?}")));
        }
        Ok(())
    }
}

/// `features` is `T×F`, `targets` is `T×k` (one coefficient vector per video frame).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequencePair {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

/// `(step, source)` pairs: network output at `step` is trained against
/// target frame `source = step − d`. Steps before `d` carry no loss.
pub fn apply_time_delay(len: usize, delay: usize) -> Result<Vec<(usize, usize)>> {
    if delay >= len {
        return Err(Error::DelayTooLarge { delay, len });
    }
    Ok((delay..len).map(|t| (t, t - delay)).collect())
}

/// Undoes the training-time shift: frame `t` takes raw output `t + d`, and the
/// tail repeats the last raw output.
pub fn realign<T: Clone>(raw: &[T], delay: usize) -> Vec<T> {
    let n = raw.len();
    (0..n).map(|t| raw[(t + delay).min(n - 1)].clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub output_mean: Vec<f64>,
    pub output_std: Vec<f64>,
}

impl Standardization {
    pub fn identity(input_dim: usize, output_dim: usize) -> Self {
        Standardization {
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
            output_mean: vec![0.0; output_dim],
            output_std: vec![1.0; output_dim],
        }
    }

    fn fit(pairs: &[SequencePair]) -> Self {
        let (input_mean, input_std) = column_stats(pairs.iter().flat_map(|p| p.features.iter()));
        let (output_mean, output_std) = column_stats(pairs.iter().flat_map(|p| p.targets.iter()));
        Standardization {
            input_mean,
            input_std,
            output_mean,
            output_std,
        }
    }
}

fn column_stats<'a>(rows: impl Iterator<Item = &'a Vec<f64>> + Clone) -> (Vec<f64>, Vec<f64>) {
    let dim = rows.clone().next().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    let mut n = 0usize;
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
        n += 1;
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd > 1e-8 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

#[derive(Clone, Debug, PartialEq)]
struct LstmLayer {
    /// `4H × in`, gate blocks ordered input, forget, cell, output.
    w_ih: Tensor,
    /// `4H × H`
    w_hh: Tensor,
    /// `4H`
    bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorModel {
    pub config: PredictorConfig,
    pub stats: Standardization,
    layers: Vec<LstmLayer>,
    /// `k × H`
    out_weight: Tensor,
    /// `k`
    out_bias: Tensor,
}

struct LayerCache {
    inputs: Vec<Vec<f64>>,
    /// post-activation gates per step, `4H`
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl PredictorModel {
    /// Seeded initialization: weights uniform in ±1/√H, forget-gate bias 1.
    pub fn init(config: &PredictorConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / (h as f64).sqrt();
        let mut uniform = |shape: &[usize]| {
            let mut t = Tensor::zeros(shape);
            t.data.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
            t
        };
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let input = if l == 0 { config.input_dim } else { h };
            let w_ih = uniform(&[4 * h, input]);
            let w_hh = uniform(&[4 * h, h]);
            let mut bias = Tensor::zeros(&[4 * h]);
            bias.data[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
            layers.push(LstmLayer { w_ih, w_hh, bias });
        }
        let out_weight = uniform(&[config.output_dim, h]);
        Ok(PredictorModel {
            config: config.clone(),
            stats: Standardization::identity(config.input_dim, config.output_dim),
            layers,
            out_weight,
            out_bias: Tensor::zeros(&[config.output_dim]),
        })
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("lstm.{l}.w_ih"), &layer.w_ih));
            out.push((format!("lstm.{l}.w_hh"), &layer.w_hh));
            out.push((format!("lstm.{l}.bias"), &layer.bias));
        }
        out.push(("out.weight".into(), &self.out_weight));
        out.push(("out.bias".into(), &self.out_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.w_ih);
            out.push(&mut layer.w_hh);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.out_weight);
        out.push(&mut self.out_bias);
        out
    }

    fn standardize_inputs(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.stats.input_mean.iter().zip(&self.stats.input_std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    fn standardize_targets(&self, targets: &[Vec<f64>]) -> Vec<Vec<f64>> {
        targets
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.stats.output_mean.iter().zip(&self.stats.output_std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    fn check_pair(&self, features: &[Vec<f64>], targets: Option<&[Vec<f64>]>) -> Result<()> {
        let f = self.config.input_dim;
        if let Some(row) = features.iter().find(|r| r.len() != f) {
            return Err(Error::ShapeMismatch(format!(
                "feature frame of width {} for a model with input_dim {f}",
                row.len()
            )));
        }
        if let Some(targets) = targets {
            if targets.len() != features.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} feature frames vs {} target frames",
                    features.len(),
                    targets.len()
                )));
            }
            let k = self.config.output_dim;
            if let Some(row) = targets.iter().find(|r| r.len() != k) {
                return Err(Error::ShapeMismatch(format!(
                    "target of width {} for output_dim {k}",
                    row.len()
                )));
            }
        }
        Ok(())
    }

    /// Standardized-space forward pass; returns raw outputs and layer caches.
    fn forward(&self, inputs: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<LayerCache>) {
        let h = self.config.hidden_size;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut seq = inputs;
        for layer in &self.layers {
            let n_in = layer.w_ih.shape[1];
            let t_len = seq.len();
            let mut gates = Vec::with_capacity(t_len);
            let mut cells = Vec::with_capacity(t_len);
            let mut hidden = Vec::with_capacity(t_len);
            let mut h_prev = vec![0.0; h];
            let mut c_prev = vec![0.0; h];
            let mut a = vec![0.0; 4 * h];
            for x in &seq {
                for (r, av) in a.iter_mut().enumerate() {
                    let wi = &layer.w_ih.data[r * n_in..(r + 1) * n_in];
                    let wh = &layer.w_hh.data[r * h..(r + 1) * h];
                    let mut s = layer.bias.data[r];
                    for (w, v) in wi.iter().zip(x) {
                        s += w * v;
                    }
                    for (w, v) in wh.iter().zip(&h_prev) {
                        s += w * v;
                    }
                    *av = s;
                }
                let mut g = vec![0.0; 4 * h];
                let mut c = vec![0.0; h];
                let mut hn = vec![0.0; h];
                for j in 0..h {
                    let i_g = sigmoid(a[j]);
                    let f_g = sigmoid(a[h + j]);
                    let c_g = a[2 * h + j].tanh();
                    let o_g = sigmoid(a[3 * h + j]);
                    g[j] = i_g;
                    g[h + j] = f_g;
                    g[2 * h + j] = c_g;
                    g[3 * h + j] = o_g;
                    c[j] = f_g * c_prev[j] + i_g * c_g;
                    hn[j] = o_g * c[j].tanh();
                }
                h_prev.copy_from_slice(&hn);
                c_prev.copy_from_slice(&c);
                gates.push(g);
                cells.push(c);
                hidden.push(hn);
            }
            let next = hidden.clone();
            caches.push(LayerCache {
                inputs: seq,
                gates,
                cells,
                hidden,
            });
            seq = next;
        }
        let k = self.config.output_dim;
        let outputs = seq
            .iter()
            .map(|hv| {
                (0..k)
                    .map(|o| {
                        let w = &self.out_weight.data[o * h..(o + 1) * h];
                        self.out_bias.data[o] + w.iter().zip(hv).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        (outputs, caches)
    }

    /// Delayed MSE over loss steps (standardized units) and its parameter
    /// gradients, in [`Self::tensors`] order.
    pub fn loss_and_gradients(&self, features: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_pair(features, Some(targets))?;
        let align = apply_time_delay(features.len(), self.config.delay_frames)?;
        let z = self.standardize_targets(targets);
        let (outputs, caches) = self.forward(self.standardize_inputs(features));

        let k = self.config.output_dim;
        let h = self.config.hidden_size;
        let norm = (align.len() * k) as f64;
        let mut loss = 0.0;
        let mut d_out = vec![vec![0.0; k]; outputs.len()];
        for &(step, src) in &align {
            for o in 0..k {
                let e = outputs[step][o] - z[src][o];
                loss += e * e;
                d_out[step][o] = 2.0 * e / norm;
            }
        }
        loss /= norm;

        let top = caches.last().expect("at least one layer");
        let mut g_out_w = vec![0.0; k * h];
        let mut g_out_b = vec![0.0; k];
        let mut d_seq: Vec<Vec<f64>> = vec![vec![0.0; h]; outputs.len()];
        for (t, dy) in d_out.iter().enumerate() {
            let hv = &top.hidden[t];
            for o in 0..k {
                if dy[o] == 0.0 {
                    continue;
                }
                g_out_b[o] += dy[o];
                for j in 0..h {
                    g_out_w[o * h + j] += dy[o] * hv[j];
                    d_seq[t][j] += dy[o] * self.out_weight.data[o * h + j];
                }
            }
        }

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(&caches).rev() {
            let n_in = layer.w_ih.shape[1];
            let mut g_ih = vec![0.0; 4 * h * n_in];
            let mut g_hh = vec![0.0; 4 * h * h];
            let mut g_b = vec![0.0; 4 * h];
            let mut d_inputs = vec![vec![0.0; n_in]; cache.inputs.len()];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let zeros = vec![0.0; h];
            let mut da = vec![0.0; 4 * h];
            for t in (0..cache.inputs.len()).rev() {
                let g = &cache.gates[t];
                let c = &cache.cells[t];
                let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
                let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zeros };
                for j in 0..h {
                    let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let tc = c[j].tanh();
                    let dh = d_seq[t][j] + dh_next[j];
                    let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
                    da[j] = dc * c_g * i_g * (1.0 - i_g);
                    da[h + j] = dc * c_prev[j] * f_g * (1.0 - f_g);
                    da[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                    da[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
                    dc_next[j] = dc * f_g;
                }
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                let x = &cache.inputs[t];
                for (r, &d) in da.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g_b[r] += d;
                    let wi = &layer.w_ih.data[r * n_in..(r + 1) * n_in];
                    let gi = &mut g_ih[r * n_in..(r + 1) * n_in];
                    for ((gv, xv), (dx, w)) in gi.iter_mut().zip(x).zip(d_inputs[t].iter_mut().zip(wi)) {
                        *gv += d * xv;
                        *dx += d * w;
                    }
                    let wh = &layer.w_hh.data[r * h..(r + 1) * h];
                    let gh = &mut g_hh[r * h..(r + 1) * h];
                    for ((gv, hv), (dn, w)) in gh.iter_mut().zip(h_prev).zip(dh_next.iter_mut().zip(wh)) {
                        *gv += d * hv;
                        *dn += d * w;
                    }
                }
            }
            layer_grads.push([g_ih, g_hh, g_b]);
            d_seq = d_inputs;
        }
        layer_grads.reverse();

        let mut grads: Vec<Vec<f64>> = layer_grads.into_iter().flatten().collect();
        grads.push(g_out_w);
        grads.push(g_out_b);
        Ok((loss, grads))
    }

    /// Raw (unshifted) outputs in coefficient units.
    pub fn predict_raw(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_pair(features, None)?;
        let (outputs, _) = self.forward(self.standardize_inputs(features));
        Ok(outputs
            .into_iter()
            .map(|r| {
                r.iter()
                    .zip(self.stats.output_mean.iter().zip(&self.stats.output_std))
                    .map(|(v, (m, s))| v * s + m)
                    .collect()
            })
            .collect())
    }

    pub fn predict_frames(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        Ok(realign(&self.predict_raw(features)?, self.config.delay_frames))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(&self.config, &self.stats);
        for (name, t) in self.tensors() {
            ck.tensors.insert(name, t.clone());
        }
        ck
    }

    pub fn from_checkpoint(mut ck: Checkpoint) -> Result<Self> {
        let config: PredictorConfig = ck.config_as()?;
        let stats: Standardization = ck.stats_as()?;
        let mut model = PredictorModel::init(&config)?;
        let names: Vec<(String, Vec<usize>)> = model.tensors().into_iter().map(|(n, t)| (n, t.shape.clone())).collect();
        for ((name, shape), slot) in names.iter().zip(model.tensors_mut()) {
            *slot = ck.take(name, shape)?;
        }
        let dims_ok = stats.input_mean.len() == config.input_dim
            && stats.input_std.len() == config.input_dim
            && stats.output_mean.len() == config.output_dim
            && stats.output_std.len() == config.output_dim
            && stats.input_std.iter().chain(&stats.output_std).all(|s| *s > 0.0);
        if !dims_ok {
            return Err(Error::ShapeMismatch("predictor standardization stats".into()));
        }
        model.stats = stats;
        Ok(model)
    }
}

pub fn predict_coeffs(model: &PredictorModel, features: &AudioFeatureSequence) -> Result<Vec<Vec<f64>>> {
    model.predict_frames(&features.frames)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPredictor {
    pub model: PredictorModel,
    /// Mean per-sequence training loss of each epoch.
    pub loss_history: Vec<f64>,
}

pub fn train_predictor(pairs: &[SequencePair], config: &PredictorConfig) -> Result<TrainedPredictor> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = PredictorModel::init(config)?;
    for p in pairs {
        model.check_pair(&p.features, Some(&p.targets))?;
        apply_time_delay(p.features.len(), config.delay_frames)?;
    }
    model.stats = Standardization::fit(pairs);

    let sizes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
    let kind = match config.optimizer {
        OptimizerChoice::Sgd => OptimizerKind::Sgd {
            lr: config.learning_rate,
        },
        OptimizerChoice::Adam => OptimizerKind::adam(config.learning_rate),
    };
    let mut opt = Optimizer::new(kind, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f5e9);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, mut grads) = model.loss_and_gradients(&pairs[i].features, &pairs[i].targets)?;
            if config.grad_clip > 0.0 {
                clip_global_norm(&mut grads, config.grad_clip);
            }
            let mut params: Vec<&mut [f64]> = model.tensors_mut().into_iter().map(|t| t.data.as_mut_slice()).collect();
            opt.step(&mut params, &grads);
            total += loss;
        }
        history.push(total / pairs.len() as f64);
    }
    Ok(TrainedPredictor {
        model,
        loss_history: history,
    })
}
