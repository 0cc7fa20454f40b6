//! Resampling and log-mel features against direct DFTs and hand-computed
//! filter edges.

use std::f64::consts::PI;

use lipsync_core::audio::{extract_features, resample_to_16k, FeatureConfig, Waveform};
use lipsync_core::tts::{StubTts, TtsAdapter};
use lipsync_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sine(freq: f64, rate: u32, n: usize) -> Waveform {
    let samples = (0..n)
        .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
        .collect();
    Waveform::new(samples, rate)
}

/// Frequency (Hz) of the largest-magnitude bin of a direct DFT.
fn dft_peak_hz(x: &[f64], rate: f64) -> (f64, f64) {
    let n = x.len();
    let (mut best, mut best_mag) = (0, 0.0);
    for k in 1..n / 2 {
        let w = 2.0 * PI * k as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            re += v * (w * i as f64).cos();
            im -= v * (w * i as f64).sin();
        }
        let mag = re.hypot(im);
        if mag > best_mag {
            best = k;
            best_mag = mag;
        }
    }
    (best as f64 * rate / n as f64, rate / n as f64)
}

#[test]
fn resampled_sine_keeps_its_frequency() {
    let out = resample_to_16k(&sine(1000.0, 48_000, 48_000)).unwrap();
    assert_eq!(out.sample_rate, 16_000);
    assert_eq!(out.samples.len(), 16_000);
    // 0.25 s keeps the direct DFT cheap; bin width 4 Hz
    let (peak, bin) = dft_peak_hz(&out.samples[4000..8000], 16_000.0);
    assert!((peak - 1000.0).abs() <= bin, "peak at {peak} Hz");
}

#[test]
fn upsampled_sine_keeps_its_frequency() {
    let out = resample_to_16k(&sine(1500.0, 8_000, 4_000)).unwrap();
    assert_eq!(out.samples.len(), 8_000);
    let (peak, bin) = dft_peak_hz(&out.samples[2000..6000], 16_000.0);
    assert!((peak - 1500.0).abs() <= bin, "peak at {peak} Hz");
}

#[test]
fn resample_length_and_rates() {
    let w = Waveform::new(vec![0.1; 44_100], 44_100);
    assert_eq!(resample_to_16k(&w).unwrap().samples.len(), 16_000);
    let w = Waveform::new(vec![0.0; 1001], 22_050);
    assert_eq!(
        resample_to_16k(&w).unwrap().samples.len(),
        (1001.0f64 * 16_000.0 / 22_050.0).round() as usize
    );
    let same = sine(440.0, 16_000, 5000);
    assert_eq!(resample_to_16k(&same).unwrap(), same);
    for bad in [7_999, 192_001, 0] {
        assert!(matches!(
            resample_to_16k(&Waveform::new(vec![0.0; 10], bad)),
            Err(Error::UnsupportedRate(_))
        ));
    }
}

/// Band edges of `bands` triangular filters spaced evenly on the HTK mel
/// scale between 0 and 8 kHz: `(lower, center, upper)` in Hz.
fn band_edges(bands: usize) -> Vec<(f64, f64, f64)> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(8000.0);
    let pts: Vec<f64> = (0..bands + 2)
        .map(|i| hz(top * i as f64 / (bands + 1) as f64))
        .collect();
    (0..bands).map(|b| (pts[b], pts[b + 1], pts[b + 2])).collect()
}

#[test]
fn tone_lands_in_the_bracketing_mel_band() {
    let f = 1000.0;
    let feats = extract_features(&sine(f, 16_000, 16_000), &FeatureConfig::default()).unwrap();
    let edges = band_edges(26);
    let below = edges.iter().rposition(|e| e.1 <= f).unwrap();
    for frame in &feats.frames {
        let arg = (0..26).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
        assert!(
            arg == below || arg == below + 1,
            "argmax {arg}, centers bracket at {below}"
        );
        assert!(edges[arg].0 < f && f < edges[arg].2);
    }
}

#[test]
fn frame_count_formula() {
    let feats = extract_features(&sine(300.0, 16_000, 16_000), &FeatureConfig::default()).unwrap();
    assert_eq!(feats.len(), 25);
    assert_eq!(feats.dim(), 26);
    assert!(matches!(
        extract_features(&Waveform::new(vec![0.0; 399], 16_000), &FeatureConfig::default()),
        Err(Error::TooShort { .. })
    ));
}

#[test]
fn silence_gives_identical_floor_frames() {
    let feats = extract_features(&Waveform::new(vec![0.0; 8000], 16_000), &FeatureConfig::default()).unwrap();
    let floor = 1e-10f64.ln();
    for frame in &feats.frames {
        assert!(frame.iter().all(|&v| v == floor));
    }
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
}

#[test]
fn delaying_by_one_hop_shifts_one_frame() {
    let x = noise(1, 12_000);
    let mut y = vec![0.0; 640];
    y.extend_from_slice(&x);
    let config = FeatureConfig::default();
    let fx = extract_features(&Waveform::new(x, 16_000), &config).unwrap();
    let fy = extract_features(&Waveform::new(y, 16_000), &config).unwrap();
    for t in 0..fx.len() {
        for (a, b) in fx.frames[t].iter().zip(&fy.frames[t + 1]) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn doubling_amplitude_never_lowers_features() {
    let x = noise(2, 9000);
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let config = FeatureConfig::default();
    let a = extract_features(&Waveform::new(x, 16_000), &config).unwrap();
    let b = extract_features(&Waveform::new(x2, 16_000), &config).unwrap();
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        assert!(fa.iter().zip(fb).all(|(u, v)| v >= u));
    }
}

#[test]
fn stub_speech_peaks_at_mapped_frequency() {
    let tts = StubTts::default();
    for c in ['a', 'm', '0', '9'] {
        let w = tts.synthesize(&c.to_string()).unwrap();
        let (peak, bin) = dft_peak_hz(&w.samples, 16_000.0);
        let want = StubTts::frequency(c).unwrap();
        assert!((peak - want).abs() <= bin, "{c}: peak {peak} Hz, want {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn frame_count_tracks_video_rate(secs in 1usize..20, fps in prop::sample::select(vec![24.0, 25.0, 29.97, 30.0, 50.0, 60.0])) {
        let n = secs * 16_000;
        let t = FeatureConfig::with_fps(fps).frame_count(n);
        prop_assert!((t as f64 - secs as f64 * fps).abs() <= 1.0, "T={t} for {secs}s at {fps}");
    }
}
