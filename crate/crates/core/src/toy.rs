//! Small seeded tasks for exercising training end to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{extract_features, FeatureConfig};
use crate::conditioner::{make_conditioned_pair, ConditionedPair};
use crate::error::Result;
use crate::predictor::SequencePair;
use crate::synth::sample_corpus;
use crate::tts::{StubTts, TtsAdapter};

/// Random text of `len` characters over letters, digits and spaces.
pub fn random_text(rng: &mut impl Rng, len: usize) -> String {
    const POOL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789   ";
    (0..len).map(|_| POOL[rng.gen_range(0..POOL.len())] as char).collect()
}

/// Log-mel features (25 fps) of stub speech for `n` random texts of
/// `min_chars..=max_chars` characters.
pub fn speech_features(seed: u64, n: usize, min_chars: usize, max_chars: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tts = StubTts::default();
    let config = FeatureConfig::default();
    (0..n)
        .map(|_| {
            let len = rng.gen_range(min_chars..=max_chars);
            let wave = tts.synthesize(&random_text(&mut rng, len))?;
            Ok(extract_features(&wave, &config)?.frames)
        })
        .collect()
}

/// Centered moving average of column `band` over `width` frames, truncated at
/// the sequence ends.
pub fn moving_average(frames: &[Vec<f64>], band: usize, width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..frames.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(frames.len() - 1);
            (lo..=hi).map(|s| frames[s][band]).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Regression of a 5-frame centered moving average of one mel band from the
/// full feature sequence. Solving it needs two frames of lookahead.
pub fn moving_average_task(seed: u64, n: usize, band: usize) -> Result<Vec<SequencePair>> {
    Ok(speech_features(seed, n, 8, 16)?
        .into_iter()
        .map(|features| {
            let targets = moving_average(&features, band, 5)
                .into_iter()
                .map(|v| vec![v])
                .collect();
            SequencePair { features, targets }
        })
        .collect())
}

/// Conditioned pairs built from `n` synthetic faces with all five mouth
/// latents varying.
pub fn inpainting_pairs(seed: u64, n: usize) -> Result<Vec<ConditionedPair>> {
    sample_corpus(seed, n, 5)?
        .iter()
        .map(|s| make_conditioned_pair(&s.image, &s.landmarks))
        .collect()
}
