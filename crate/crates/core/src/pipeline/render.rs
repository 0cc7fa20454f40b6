//! Speech → predicted mouth shapes → in-painted frames on a target clip.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{frame_path, Clip};
use super::dataset::PCA_FILE;
use super::{write_json, Staging};
use crate::audio::{extract_features, resample_to_16k, FeatureConfig, Waveform};
use crate::checkpoint::Checkpoint;
use crate::conditioner::make_conditioned_pair;
use crate::error::{Error, Result};
use crate::geometry::{denormalize, estimate_frame, NormalizationParams, Point, NUM_MOUTH};
use crate::image::Image;
use crate::inpaint::{infer_frame, InpainterModel};
use crate::pca::{PcaBasis, PcaCoeffs};
use crate::predictor::{predict_coeffs, PredictorModel};
use crate::tts::TtsAdapter;

pub const RENDER_MANIFEST_FILE: &str = "render_manifest.json";
const AUDIO_FILE: &str = "audio.wav";

#[derive(Clone, Debug, PartialEq)]
pub enum AudioSource {
    Text(String),
    Wav(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    pub audio: AudioSource,
    /// Clip directory holding `clip.json`.
    pub target: PathBuf,
    pub pca: PathBuf,
    pub keypoints: PathBuf,
    pub inpainter: PathBuf,
    pub out: PathBuf,
    /// 1 renders serially; more fans frames out to a thread pool.
    pub workers: usize,
    /// Recorded in the manifest; rendering itself draws no random numbers.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderFrame {
    pub frame_index: usize,
    pub source_target_frame: usize,
    pub params: NormalizationParams,
    pub mouth_points_px: Vec<Point>,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderManifest {
    pub fps: f64,
    pub audio_path: String,
    pub frame_count: usize,
    pub seed: u64,
    pub frames: Vec<RenderFrame>,
}

struct Rendered {
    record: RenderFrame,
    image: Image,
}

fn render_frame(
    t: usize,
    clip: &Clip,
    basis: &PcaBasis,
    coeffs: &[f64],
    inpainter: &InpainterModel,
) -> Result<Rendered> {
    let target = &clip.landmarks[t];
    let params = estimate_frame(target)?;
    let shape = basis.reconstruct_shape(&PcaCoeffs(coeffs.to_vec()))?;
    let mouth: [Point; NUM_MOUTH] = denormalize(&shape, &params);
    let pair = make_conditioned_pair(&clip.frame(t)?, &target.with_mouth(&mouth))?;
    let image = infer_frame(inpainter, &pair.input_image)?;
    Ok(Rendered {
        record: RenderFrame {
            frame_index: t,
            source_target_frame: t,
            params,
            mouth_points_px: mouth.to_vec(),
            coeffs: coeffs.to_vec(),
        },
        image,
    })
}

/// Renders one frame per audio feature frame onto the matching target frame.
///
/// Writes `frame_%06d.ppm`, `audio.wav` (16 kHz), `render_manifest.json` and a
/// copy of `pca_basis.json` into `opts.out`, replacing it; nothing is written
/// on failure. Output is identical for any worker count.
pub fn render_video(opts: &RenderOptions, tts: &dyn TtsAdapter) -> Result<RenderManifest> {
    let wave = match &opts.audio {
        AudioSource::Text(text) => tts.synthesize(text)?,
        AudioSource::Wav(path) => Waveform::read_wav(path)?,
    };
    let wave = resample_to_16k(&wave)?;

    let clip = Clip::open(&opts.target)?;
    let basis = PcaBasis::load(&opts.pca)?;
    let predictor = PredictorModel::from_checkpoint(Checkpoint::load(&opts.keypoints)?)?;
    let inpainter = InpainterModel::from_checkpoint(Checkpoint::load(&opts.inpainter)?)?;
    if predictor.config.output_dim != basis.k {
        return Err(Error::ShapeMismatch(format!(
            "predictor emits {} coefficients, PCA basis has {}",
            predictor.config.output_dim, basis.k
        )));
    }

    let features = extract_features(&wave, &FeatureConfig::with_fps(clip.entry.fps))?;
    let n = features.len();
    if n > clip.len() {
        return Err(Error::InsufficientTargetFrames {
            needed: n,
            available: clip.len(),
        });
    }
    let coeffs = predict_coeffs(&predictor, &features)?;

    let one = |t: usize| render_frame(t, &clip, &basis, &coeffs[t], &inpainter);
    let rendered: Vec<Rendered> = if opts.workers <= 1 {
        (0..n).map(one).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
            .install(|| (0..n).into_par_iter().map(one).collect::<Result<_>>())?
    };

    let staging = Staging::new(&opts.out)?;
    let root = staging.path();
    for r in &rendered {
        r.image.write_ppm(&frame_path(root, r.record.frame_index))?;
    }
    wave.write_wav(&root.join(AUDIO_FILE))?;
    basis.save(&root.join(PCA_FILE))?;
    let manifest = RenderManifest {
        fps: clip.entry.fps,
        audio_path: AUDIO_FILE.into(),
        frame_count: n,
        seed: opts.seed,
        frames: rendered.into_iter().map(|r| r.record).collect(),
    };
    write_json(&root.join(RENDER_MANIFEST_FILE), &manifest)?;
    staging.commit()?;
    Ok(manifest)
}
