//! Outline-conditioned mouth in-painting with a small U-Net trained on L1 loss.
//!
//! Architecture for depth `D` and base width `B` (channel width of level `i`
//! is `B·2^min(i,3)`):
//!
//! * encoder level `i`: 4×4 conv, stride 2, pad 1, LeakyReLU(0.2);
//! * decoder level `i` (from `D−1` down to 0): 4×4 transposed conv, stride 2,
//!   pad 1, ReLU; its input is the deepest encoder output at `i = D−1` and
//!   otherwise the previous decoder output concatenated with encoder `i`;
//! * head: the level-0 decoder output concatenated with the raw input, 3×3
//!   conv, sigmoid.
//!
//! There is no adversarial term and no temporal state: a frame's output is a
//! pure function of the model and that frame's conditioned input.

pub mod conv;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::conditioner::ConditionedPair;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::optim::{Optimizer, OptimizerKind};
use conv::{col2im, gemm, im2col, Geom};

const LEAK: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InpainterConfig {
    /// (width, height)
    pub image_size: (usize, usize),
    pub depth: usize,
    pub base_channels: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for InpainterConfig {
    fn default() -> Self {
        InpainterConfig {
            image_size: (64, 64),
            depth: 4,
            base_channels: 32,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 8,
            seed: 0,
        }
    }
}

impl InpainterConfig {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.image_size;
        let unit = 1usize.checked_shl(self.depth as u32).unwrap_or(0);
        if self.depth == 0 || unit == 0 || w == 0 || h == 0 || w % unit != 0 || h % unit != 0 {
            return Err(Error::InvalidParams(format!(
                "image size {w}x{h} must be a positive multiple of 2^depth (depth {})",
                self.depth
            )));
        }
        if self.base_channels == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParams(
                "base_channels and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }

    fn width_of(&self, level: usize) -> usize {
        self.base_channels << level.min(3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    /// `geom` describes the input image.
    Conv,
    /// `geom` describes the (larger) output image.
    ConvTranspose,
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    kind: Kind,
    geom: Geom,
    cin: usize,
    cout: usize,
    /// Conv: `cout × (cin·k·k)`; transposed: `cin × (cout·k·k)`.
    weight: Tensor,
    bias: Tensor,
}

impl Layer {
    fn new(kind: Kind, geom: Geom, cin: usize, cout: usize, rng: &mut ChaCha8Rng, gain: f64) -> Self {
        let kk = geom.k * geom.k;
        let (shape, fan_in) = match kind {
            Kind::Conv => (vec![cout, cin, geom.k, geom.k], cin * kk),
            Kind::ConvTranspose => (vec![cin, cout, geom.k, geom.k], cin * kk / (geom.stride * geom.stride)),
        };
        let bound = gain * (6.0 / fan_in as f64).sqrt();
        let mut weight = Tensor::zeros(&shape);
        weight.data.iter_mut().for_each(|w| *w = rng.gen_range(-bound..bound));
        Layer {
            kind,
            geom,
            cin,
            cout,
            weight,
            bias: Tensor::zeros(&[cout]),
        }
    }

    fn in_positions(&self) -> usize {
        match self.kind {
            Kind::Conv => self.geom.height * self.geom.width,
            Kind::ConvTranspose => self.geom.positions(),
        }
    }

    fn out_positions(&self) -> usize {
        match self.kind {
            Kind::Conv => self.geom.positions(),
            Kind::ConvTranspose => self.geom.height * self.geom.width,
        }
    }

    /// Returns the pre-activation output and the saved operand for backward
    /// (patch matrix for convs, the input for transposed convs).
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let kk = self.geom.k * self.geom.k;
        match self.kind {
            Kind::Conv => {
                let npos = self.geom.positions();
                let mut cols = vec![0.0; self.geom.rows() * npos];
                im2col(x, &self.geom, &mut cols);
                let mut y = vec![0.0; self.cout * npos];
                for (o, row) in y.chunks_exact_mut(npos).enumerate() {
                    row.iter_mut().for_each(|v| *v = self.bias.data[o]);
                }
                gemm(
                    self.cout,
                    self.cin * kk,
                    npos,
                    &self.weight.data,
                    false,
                    &cols,
                    false,
                    1.0,
                    &mut y,
                );
                (y, cols)
            }
            Kind::ConvTranspose => {
                let npos = self.geom.positions();
                let mut cols = vec![0.0; self.cout * kk * npos];
                gemm(
                    self.cout * kk,
                    self.cin,
                    npos,
                    &self.weight.data,
                    true,
                    x,
                    false,
                    0.0,
                    &mut cols,
                );
                let plane = self.geom.height * self.geom.width;
                let mut y = vec![0.0; self.cout * plane];
                col2im(&cols, &self.geom, &mut y);
                for (o, row) in y.chunks_exact_mut(plane).enumerate() {
                    row.iter_mut().for_each(|v| *v += self.bias.data[o]);
                }
                (y, x.to_vec())
            }
        }
    }

    /// Accumulates weight/bias gradients; returns the input gradient if asked.
    fn backward(&self, saved: &[f64], dy: &[f64], gw: &mut [f64], gb: &mut [f64], want_dx: bool) -> Option<Vec<f64>> {
        let kk = self.geom.k * self.geom.k;
        let out_pos = self.out_positions();
        for (o, row) in dy.chunks_exact(out_pos).enumerate() {
            gb[o] += row.iter().sum::<f64>();
        }
        match self.kind {
            Kind::Conv => {
                let npos = self.geom.positions();
                gemm(self.cout, npos, self.cin * kk, dy, false, saved, true, 1.0, gw);
                want_dx.then(|| {
                    let mut dcols = vec![0.0; self.cin * kk * npos];
                    gemm(
                        self.cin * kk,
                        self.cout,
                        npos,
                        &self.weight.data,
                        true,
                        dy,
                        false,
                        0.0,
                        &mut dcols,
                    );
                    let mut dx = vec![0.0; self.cin * self.geom.height * self.geom.width];
                    col2im(&dcols, &self.geom, &mut dx);
                    dx
                })
            }
            Kind::ConvTranspose => {
                let npos = self.geom.positions();
                let mut dcols = vec![0.0; self.cout * kk * npos];
                im2col(dy, &self.geom, &mut dcols);
                gemm(self.cin, npos, self.cout * kk, saved, false, &dcols, true, 1.0, gw);
                want_dx.then(|| {
                    let mut dx = vec![0.0; self.cin * self.in_positions()];
                    gemm(
                        self.cin,
                        self.cout * kk,
                        npos,
                        &self.weight.data,
                        false,
                        &dcols,
                        false,
                        0.0,
                        &mut dx,
                    );
                    dx
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InpainterModel {
    pub config: InpainterConfig,
    encoders: Vec<Layer>,
    /// Index `i` is decoder level `i`; evaluated from `D−1` down to 0.
    decoders: Vec<Layer>,
    head: Layer,
}

struct Trace {
    enc_saved: Vec<Vec<f64>>,
    enc_out: Vec<Vec<f64>>,
    dec_saved: Vec<Vec<f64>>,
    dec_out: Vec<Vec<f64>>,
    head_saved: Vec<f64>,
    output: Vec<f64>,
}

impl InpainterModel {
    pub fn init(config: &InpainterConfig) -> Result<Self> {
        config.validate()?;
        let (w, h) = config.image_size;
        let d = config.depth;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoders = (0..d)
            .map(|i| {
                let cin = if i == 0 { 3 } else { config.width_of(i - 1) };
                let geom = Geom {
                    channels: cin,
                    height: h >> i,
                    width: w >> i,
                    k: 4,
                    stride: 2,
                    pad: 1,
                };
                Layer::new(Kind::Conv, geom, cin, config.width_of(i), &mut rng, 1.0)
            })
            .collect();
        let mut decoders: Vec<Layer> = (0..d)
            .rev()
            .map(|i| {
                let cin = if i == d - 1 {
                    config.width_of(i)
                } else {
                    2 * config.width_of(i)
                };
                let cout = if i == 0 {
                    config.base_channels
                } else {
                    config.width_of(i - 1)
                };
                let geom = Geom {
                    channels: cout,
                    height: h >> i,
                    width: w >> i,
                    k: 4,
                    stride: 2,
                    pad: 1,
                };
                Layer::new(Kind::ConvTranspose, geom, cin, cout, &mut rng, 1.0)
            })
            .collect();
        decoders.reverse();
        let head_in = config.base_channels + 3;
        let head_geom = Geom {
            channels: head_in,
            height: h,
            width: w,
            k: 3,
            stride: 1,
            pad: 1,
        };
        let head = Layer::new(Kind::Conv, head_geom, head_in, 3, &mut rng, 0.1);
        Ok(InpainterModel {
            config: config.clone(),
            encoders,
            decoders,
            head,
        })
    }

    fn layers(&self) -> impl Iterator<Item = (String, &Layer)> {
        let enc = self.encoders.iter().enumerate().map(|(i, l)| (format!("enc.{i}"), l));
        let dec = self.decoders.iter().enumerate().map(|(i, l)| (format!("dec.{i}"), l));
        enc.chain(dec).chain(std::iter::once(("head".to_string(), &self.head)))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.encoders
            .iter_mut()
            .chain(self.decoders.iter_mut())
            .chain(std::iter::once(&mut self.head))
    }

    /// Named parameter tensors in a fixed order (weight, bias per layer).
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        self.layers()
            .flat_map(|(name, l)| [(format!("{name}.weight"), &l.weight), (format!("{name}.bias"), &l.bias)])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn forward(&self, input: &[f64]) -> Trace {
        let d = self.config.depth;
        let mut enc_saved = Vec::with_capacity(d);
        let mut enc_out: Vec<Vec<f64>> = Vec::with_capacity(d);
        for (i, layer) in self.encoders.iter().enumerate() {
            let x = if i == 0 { input } else { &enc_out[i - 1] };
            let (mut y, saved) = layer.forward(x);
            y.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= LEAK
                }
            });
            enc_saved.push(saved);
            enc_out.push(y);
        }

        let mut dec_saved = vec![Vec::new(); d];
        let mut dec_out = vec![Vec::new(); d];
        for i in (0..d).rev() {
            let x = if i == d - 1 {
                enc_out[i].clone()
            } else {
                let mut cat = dec_out[i + 1].clone();
                cat.extend_from_slice(&enc_out[i]);
                cat
            };
            let (mut y, saved) = self.decoders[i].forward(&x);
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            dec_saved[i] = saved;
            dec_out[i] = y;
        }

        let mut head_in = dec_out[0].clone();
        head_in.extend_from_slice(input);
        let (mut output, head_saved) = self.head.forward(&head_in);
        output.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
        Trace {
            enc_saved,
            enc_out,
            dec_saved,
            dec_out,
            head_saved,
            output,
        }
    }

    /// Backpropagates `d_output` (gradient w.r.t. the sigmoid output) and adds
    /// parameter gradients into `grads` ([`Self::tensors`] order).
    fn backward(&self, trace: &Trace, d_output: &[f64], grads: &mut [Vec<f64>]) {
        let d = self.config.depth;
        let (enc_g, rest) = grads.split_at_mut(2 * d);
        let (dec_g, head_g) = rest.split_at_mut(2 * d);

        let d_pre: Vec<f64> = d_output
            .iter()
            .zip(&trace.output)
            .map(|(g, y)| g * y * (1.0 - y))
            .collect();
        let (hw, hb) = head_g.split_at_mut(1);
        let d_head_in = self
            .head
            .backward(&trace.head_saved, &d_pre, &mut hw[0], &mut hb[0], true)
            .expect("head input gradient");
        let mut d_dec_out = vec![Vec::new(); d];
        d_dec_out[0] = d_head_in[..trace.dec_out[0].len()].to_vec();

        let mut d_enc_out: Vec<Vec<f64>> = trace.enc_out.iter().map(|e| vec![0.0; e.len()]).collect();
        for i in 0..d {
            let mut dy = std::mem::take(&mut d_dec_out[i]);
            for (g, y) in dy.iter_mut().zip(&trace.dec_out[i]) {
                if *y <= 0.0 {
                    *g = 0.0;
                }
            }
            let (w, b) = dec_g[2 * i..2 * i + 2].split_at_mut(1);
            let dx = self.decoders[i]
                .backward(&trace.dec_saved[i], &dy, &mut w[0], &mut b[0], true)
                .expect("decoder input gradient");
            if i == d - 1 {
                d_enc_out[i].iter_mut().zip(&dx).for_each(|(a, g)| *a += g);
            } else {
                let split = trace.dec_out[i + 1].len();
                d_dec_out[i + 1] = dx[..split].to_vec();
                d_enc_out[i].iter_mut().zip(&dx[split..]).for_each(|(a, g)| *a += g);
            }
        }

        for i in (0..d).rev() {
            let mut dy = std::mem::take(&mut d_enc_out[i]);
            for (g, y) in dy.iter_mut().zip(&trace.enc_out[i]) {
                if *y <= 0.0 {
                    *g *= LEAK;
                }
            }
            let (w, b) = enc_g[2 * i..2 * i + 2].split_at_mut(1);
            let dx = self.encoders[i].backward(&trace.enc_saved[i], &dy, &mut w[0], &mut b[0], i > 0);
            if let Some(dx) = dx {
                d_enc_out[i - 1].iter_mut().zip(&dx).for_each(|(a, g)| *a += g);
            }
        }
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect()
    }

    fn check_size(&self, size: (usize, usize)) -> Result<()> {
        if size != self.config.image_size {
            return Err(Error::SizeMismatch {
                expected: self.config.image_size,
                actual: size,
            });
        }
        Ok(())
    }

    /// Mean absolute pixel error of the prediction for `input` against `target`.
    pub fn l1_loss(&self, input: &Image, target: &Image) -> Result<f64> {
        self.check_size(input.size())?;
        self.check_size(target.size())?;
        let out = self.forward(&input.to_chw()).output;
        Ok(mean_abs_diff(&out, &target.to_chw()))
    }

    /// L1 loss of one pair plus its parameter gradients ([`Self::tensors`] order).
    pub fn loss_and_gradients(&self, input: &Image, target: &Image) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut grads = self.zero_grads();
        let loss = self.accumulate(input, target, 1.0, &mut grads)?;
        Ok((loss, grads))
    }

    fn accumulate(&self, input: &Image, target: &Image, weight: f64, grads: &mut [Vec<f64>]) -> Result<f64> {
        self.check_size(input.size())?;
        self.check_size(target.size())?;
        let trace = self.forward(&input.to_chw());
        let t = target.to_chw();
        let n = t.len() as f64;
        let d_out: Vec<f64> = trace
            .output
            .iter()
            .zip(&t)
            .map(|(y, t)| {
                let e = y - t;
                weight
                    * if e > 0.0 {
                        1.0 / n
                    } else if e < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
            })
            .collect();
        let loss = mean_abs_diff(&trace.output, &t);
        self.backward(&trace, &d_out, grads);
        Ok(loss)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(&self.config, &serde_json::json!({}));
        for (name, t) in self.tensors() {
            ck.tensors.insert(name, t.clone());
        }
        ck
    }

    pub fn from_checkpoint(mut ck: Checkpoint) -> Result<Self> {
        let config: InpainterConfig = ck.config_as()?;
        let mut model = InpainterModel::init(&config)?;
        let names: Vec<(String, Vec<usize>)> = model.tensors().into_iter().map(|(n, t)| (n, t.shape.clone())).collect();
        for ((name, shape), slot) in names.iter().zip(model.tensors_mut()) {
            *slot = ck.take(name, shape)?;
        }
        Ok(model)
    }
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Synthesizes one frame from its conditioned input.
pub fn infer_frame(model: &InpainterModel, input: &Image) -> Result<Image> {
    model.check_size(input.size())?;
    let (w, h) = model.config.image_size;
    let mut out = model.forward(&input.to_chw()).output;
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Image::from_chw(w, h, &out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedInpainter {
    pub model: InpainterModel,
    /// Mean per-pair L1 loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Minibatch Adam on mean absolute pixel error; deterministic for a seed.
pub fn train_inpainter(pairs: &[ConditionedPair], config: &InpainterConfig) -> Result<TrainedInpainter> {
    train_inpainter_with(pairs, config, |_, _| {})
}

/// As [`train_inpainter`], calling `on_epoch(epoch, loss)` after every epoch.
pub fn train_inpainter_with(
    pairs: &[ConditionedPair],
    config: &InpainterConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedInpainter> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = InpainterModel::init(config)?;
    for p in pairs {
        model.check_size(p.input_image.size())?;
        model.check_size(p.target_image.size())?;
    }
    let sizes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut opt = Optimizer::new(
        OptimizerKind::Adam {
            lr: config.learning_rate,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        },
        &sizes,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1a_9a1e7);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                total += model.accumulate(&pairs[i].input_image, &pairs[i].target_image, w, &mut grads)?;
            }
            let mut params: Vec<&mut [f64]> = model.tensors_mut().into_iter().map(|t| t.data.as_mut_slice()).collect();
            opt.step(&mut params, &grads);
        }
        let epoch_loss = total / pairs.len() as f64;
        history.push(epoch_loss);
        on_epoch(epoch, epoch_loss);
    }
    Ok(TrainedInpainter {
        model,
        loss_history: history,
    })
}
