//! 16 kHz resampling and frame-synchronous log-mel features.
//!
//! Features use a Hann window, a magnitude spectrum, `F` triangular HTK-mel
//! filters spanning 0–8 kHz with unit peaks, and `ln(energy + floor_eps)`.
//! The hop is one video frame (`16000 / fps` samples), so feature frame `t`
//! lines up with video frame `t`.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TARGET_RATE: u32 = 16_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Reads integer or float PCM; multi-channel audio is averaged to mono.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let wav_err = |source| Error::Wav {
            path: path.to_path_buf(),
            source,
        };
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
        let spec = reader.spec();
        let channels = usize::from(spec.channels.max(1));
        let interleaved: Vec<f64> = match spec.sample_format {
            hound::SampleFormat::Int => {
                let full = f64::from(1u32 << (spec.bits_per_sample - 1));
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| f64::from(v) / full))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(wav_err)?
            }
            hound::SampleFormat::Float => reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?,
        };
        let samples = interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect();
        Ok(Waveform::new(samples, spec.sample_rate))
    }

    /// Writes 16-bit mono PCM.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let wav_err = |source| Error::Wav {
            path: path.to_path_buf(),
            source,
        };
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
        for &s in &self.samples {
            let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            writer.write_sample(v).map_err(wav_err)?;
        }
        writer.finalize().map_err(wav_err)
    }
}

const SINC_ZERO_CROSSINGS: f64 = 16.0;
const CUTOFF_MARGIN: f64 = 0.97;

/// Band-limited resampling to 16 kHz with a Blackman-windowed sinc kernel.
///
/// Output sample `n` sits at input position `n·sr/16000`; the kernel cutoff is
/// `0.97·min(1, 16000/sr)` of the input Nyquist band and spans 16 zero
/// crossings on each side. Samples beyond the ends are taken as zero. The
/// output length is `round(N·16000/sr)`.
pub fn resample_to_16k(wave: &Waveform) -> Result<Waveform> {
    let sr = wave.sample_rate;
    if !(8_000..=192_000).contains(&sr) {
        return Err(Error::UnsupportedRate(sr));
    }
    if sr == TARGET_RATE {
        return Ok(wave.clone());
    }
    let ratio = f64::from(TARGET_RATE) / f64::from(sr);
    let out_len = (wave.samples.len() as f64 * ratio).round() as usize;
    let fc = CUTOFF_MARGIN * ratio.min(1.0);
    let half_width = SINC_ZERO_CROSSINGS / fc;
    let step = f64::from(sr) / f64::from(TARGET_RATE);
    let x = &wave.samples;

    let samples = (0..out_len)
        .map(|n| {
            let t = n as f64 * step;
            let lo = ((t - half_width).ceil().max(0.0)) as usize;
            let hi = ((t + half_width).floor() as usize).min(x.len().saturating_sub(1));
            (lo..=hi)
                .map(|k| {
                    let tau = t - k as f64;
                    x[k] * fc * sinc(fc * tau) * blackman(tau / half_width)
                })
                .sum()
        })
        .collect();
    Ok(Waveform::new(samples, TARGET_RATE))
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Blackman window on `u ∈ [−1, 1]`.
fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let a = std::f64::consts::PI * (u + 1.0);
    0.42 - 0.5 * a.cos() + 0.08 * (2.0 * a).cos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub window_ms: f64,
    pub fps: f64,
    pub mel_bands: usize,
    pub floor_eps: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window_ms: 25.0,
            fps: 25.0,
            mel_bands: 26,
            floor_eps: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn with_fps(fps: f64) -> Self {
        FeatureConfig {
            fps,
            ..Default::default()
        }
    }

    pub fn window_samples(&self) -> usize {
        (self.window_ms * f64::from(TARGET_RATE) / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> f64 {
        f64::from(TARGET_RATE) / self.fps
    }

    pub fn fft_size(&self) -> usize {
        self.window_samples().next_power_of_two()
    }

    /// Number of feature frames for `n` samples, `floor((N − win)/hop) + 1`.
    pub fn frame_count(&self, n: usize) -> usize {
        let win = self.window_samples();
        if n < win {
            0
        } else {
            ((n - win) as f64 / self.hop_samples()).floor() as usize + 1
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) || self.mel_bands == 0 || self.window_samples() == 0 {
            return Err(Error::InvalidParams(format!("bad feature config {self:?}")));
        }
        if self.window_samples() as f64 > 4.0 * self.hop_samples() {
            return Err(Error::InvalidParams("window exceeds four hops".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatureSequence {
    pub frames: Vec<Vec<f64>>,
    pub fps: f64,
    pub config: FeatureConfig,
}

impl AudioFeatureSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.config.mel_bands
    }

    /// Debug dump `{"fps", "F", "frames"}`.
    pub fn to_debug_json(&self) -> serde_json::Value {
        serde_json::json!({
            "fps": self.fps,
            "F": self.config.mel_bands,
            "frames": self.frames,
        })
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Reusable FFT plan, window and filterbank for one [`FeatureConfig`].
pub struct FeatureExtractor {
    config: FeatureConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// `mel_bands × (fft_size/2 + 1)` weights.
    filters: Vec<Vec<f64>>,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let win = config.window_samples();
        let n_fft = config.fft_size();
        let window = (0..win)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        let filters = mel_filterbank(config.mel_bands, n_fft, f64::from(TARGET_RATE));
        Ok(FeatureExtractor {
            config,
            window,
            fft,
            filters,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn extract(&self, wave: &Waveform) -> Result<AudioFeatureSequence> {
        if wave.sample_rate != TARGET_RATE {
            return Err(Error::UnsupportedRate(wave.sample_rate));
        }
        let win = self.config.window_samples();
        let n = wave.samples.len();
        if n < win {
            return Err(Error::TooShort {
                samples: n,
                needed: win,
            });
        }
        let n_fft = self.config.fft_size();
        let hop = self.config.hop_samples();
        let count = self.config.frame_count(n);
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut mag = vec![0.0; n_fft / 2 + 1];

        let frames = (0..count)
            .map(|t| {
                let start = (t as f64 * hop).floor() as usize;
                for (i, b) in buf.iter_mut().enumerate() {
                    let v = if i < win {
                        wave.samples[start + i] * self.window[i]
                    } else {
                        0.0
                    };
                    *b = Complex::new(v, 0.0);
                }
                self.fft.process(&mut buf);
                for (m, c) in mag.iter_mut().zip(&buf) {
                    *m = c.norm();
                }
                self.filters
                    .iter()
                    .map(|f| {
                        let e: f64 = f.iter().zip(&mag).map(|(w, m)| w * m).sum();
                        (e + self.config.floor_eps).ln()
                    })
                    .collect()
            })
            .collect();
        Ok(AudioFeatureSequence {
            frames,
            fps: self.config.fps,
            config: self.config.clone(),
        })
    }
}

pub fn extract_features(wave: &Waveform, config: &FeatureConfig) -> Result<AudioFeatureSequence> {
    FeatureExtractor::new(config.clone())?.extract(wave)
}

fn mel_filterbank(bands: usize, n_fft: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate / n_fft as f64;
    (0..bands)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..=n_fft / 2)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}
