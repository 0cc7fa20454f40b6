//! Fixtures shared by the benchmarks.

use lipsync_core::audio::{extract_features, FeatureConfig, Waveform};
use lipsync_core::conditioner::{make_conditioned_pair, ConditionedPair};
use lipsync_core::inpaint::{InpainterConfig, InpainterModel};
use lipsync_core::predictor::{PredictorConfig, PredictorModel};
use lipsync_core::synth::{sample_corpus, SyntheticSample};
use lipsync_core::tts::{StubTts, TtsAdapter};
use lipsync_core::{mouth_shape, normalize};

pub fn faces(n: usize) -> Vec<SyntheticSample> {
    sample_corpus(17, n, 5).expect("synthetic corpus")
}

pub fn mouth_shapes(n: usize) -> Vec<Vec<f64>> {
    faces(n)
        .iter()
        .map(|s| mouth_shape(&normalize(&s.landmarks).expect("valid face")).0)
        .collect()
}

/// Stub speech for a 40-character sentence, about six seconds at 16 kHz.
pub fn speech() -> Waveform {
    StubTts::default()
        .synthesize("the quick brown fox jumps over 13 lazy dogs")
        .expect("stub speech")
}

pub fn feature_frames() -> Vec<Vec<f64>> {
    extract_features(&speech(), &FeatureConfig::default())
        .expect("features")
        .frames
}

/// Predictor with the default desk-scale shape, untrained.
pub fn predictor() -> PredictorModel {
    PredictorModel::init(&PredictorConfig {
        input_dim: 26,
        output_dim: 5,
        ..PredictorConfig::default()
    })
    .expect("predictor config")
}

/// Desk-scale in-painter, untrained.
pub fn inpainter() -> InpainterModel {
    InpainterModel::init(&InpainterConfig::default()).expect("in-painter config")
}

pub fn conditioned_pair() -> ConditionedPair {
    let s = &faces(1)[0];
    make_conditioned_pair(&s.image, &s.landmarks).expect("conditioned pair")
}
